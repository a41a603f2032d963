"""Input validation for workspace paths and names."""

from __future__ import annotations

from pathlib import Path

from .logging import get_logger

logger = get_logger("core.security")


def validate_file_path(
    path: str | Path,
    allowed_extensions: set[str] | None = None,
    must_exist: bool = False,
) -> Path:
    """Validate a file path referenced by a manifest or scenario.

    Args:
        path: The file path to validate.
        allowed_extensions: Set of allowed suffixes (e.g., ``{'.obj'}``).
        must_exist: Require the path to exist.

    Returns:
        The resolved Path object.

    Raises:
        ValueError: If the path is invalid or escapes via ``..``.
        FileNotFoundError: If ``must_exist`` and the path is missing.
    """
    if isinstance(path, str):
        path = Path(path)

    if ".." in path.parts:
        logger.warning(f"Path traversal attempt detected: {path}")
        raise ValueError(f"Path traversal not allowed: {path}")

    resolved_path = path.resolve()
    if allowed_extensions and resolved_path.suffix.lower() not in allowed_extensions:
        raise ValueError(
            f"File extension {resolved_path.suffix} not allowed. "
            f"Allowed: {sorted(allowed_extensions)}"
        )
    if must_exist and not resolved_path.exists():
        raise FileNotFoundError(str(resolved_path))

    logger.debug(f"Validated file path: {resolved_path}")
    return resolved_path


def safe_filename(filename: str, max_length: int = 255) -> str:
    """Create a safe filename by removing/replacing dangerous characters."""
    if not filename:
        return "unnamed_file"

    filename = Path(filename).name
    for char in r'<>:"/\|?*':
        filename = filename.replace(char, "_")
    filename = "".join(char for char in filename if ord(char) >= 32)
    filename = filename.strip(" .")

    if not filename or filename.replace("_", "").replace(".", "") == "":
        filename = "unnamed_file"

    if len(filename) > max_length:
        name, ext = Path(filename).stem, Path(filename).suffix
        filename = name[: max_length - len(ext)] + ext

    return filename
