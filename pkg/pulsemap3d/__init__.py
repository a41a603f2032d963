"""pulsemap3d: 3D blood-pulsation maps from multi-view skin video."""

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "models",
]
