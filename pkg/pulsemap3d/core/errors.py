"""Error hierarchy for pulsemap3d.

Every domain error is a ``ValueError`` so callers that only guard against bad input keep
working; the CLI maps the ``PulseMapError`` family to the validation exit code.
"""

from __future__ import annotations


class PulseMapError(ValueError):
    """Base class of all pipeline errors."""

    kind = "PulseMapError"

    def __init_subclass__(cls, **kwargs: object) -> None:
        super().__init_subclass__(**kwargs)
        cls.kind = cls.__name__


class PreconditionError(PulseMapError):
    """An operation was called outside its documented domain."""


# signal core
class NonPositiveBaseline(PulseMapError):
    """The lowpass baseline of an intensity signal reached zero or below."""


class InvalidBand(PulseMapError):
    """Filter band edges are not ordered inside (0, fs/2)."""


class TooShort(PulseMapError):
    """Signal is too short for the requested transform."""


class DegenerateReference(PulseMapError):
    """Reference signal cannot be scaled (vanishing self-projection)."""


# BVP extraction
class SignalTooShort(PulseMapError):
    """Signal shorter than one POS window or the required duration."""


class ZeroVariance(PulseMapError):
    """Signal carries no temporal variation."""


class EmptyMask(PulseMapError):
    """Skin mask selects no pixel."""


class NoSpectralPeak(PulseMapError):
    """No dominant spectral peak inside the physiological range."""


class SpanMismatch(PulseMapError):
    """Two signals do not cover a common time span."""


# pulse maps
class LengthMismatch(PulseMapError):
    """Signals that must be aligned have different lengths."""


class Infeasible(PulseMapError):
    """Requested segmentation does not fit the recording."""


class ZeroSignal(PulseMapError):
    """Spectrum has no energy in the physiological range."""


# geometry
class MissingUVs(PulseMapError):
    """Mesh has no texture coordinates."""


class LandmarkOffSurface(PulseMapError):
    """A 2D landmark does not hit the rendered surface."""


# morphable model
class DimensionMismatch(PulseMapError):
    """Coefficient vectors do not match the model bases."""


class DegenerateConfiguration(PulseMapError):
    """Point configuration is collinear or coincident."""


class NonFiniteObjective(PulseMapError):
    """Fitting objective became NaN or infinite."""


class NoCorrespondences(PulseMapError):
    """No model-to-scan correspondence could be established."""


# oracle
class InvalidScenario(PulseMapError):
    """Synthetic scenario parameters are out of range."""


# evaluation
class ConstantInput(PulseMapError):
    """Correlation input is constant."""


class NoValidPixels(PulseMapError):
    """No valid pixel is left to evaluate."""


class SemanticMismatch(PulseMapError):
    """Textures of different semantic or resolution were combined."""


# orchestration
class ManifestError(PulseMapError):
    """Run manifest is inconsistent with the workspace."""


class CorruptFileError(OSError):
    """An input file exists but its content cannot be parsed.

    Derives from ``OSError`` so the CLI reports it with the I/O exit code.
    """

    kind = "CorruptFile"
