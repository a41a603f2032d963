"""PNG frame sequences and skin masks (OpenCV codecs, RGB order in memory)."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from ..core.errors import CorruptFileError
from ..core.logging import get_logger
from ..models import RgbFrameSequence, SkinMask

logger = get_logger("data_adapters.image")

FRAME_PATTERN = "{index:06d}.png"


def read_image(path: str | Path) -> np.ndarray:
    """Read an 8- or 16-bit PNG; colour images are returned in RGB order.

    Raises:
        FileNotFoundError: If the file does not exist.
        CorruptFileError: If OpenCV cannot decode it.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    img = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise CorruptFileError(f"Cannot decode image: {p}")
    if img.ndim == 3:
        img = cv2.cvtColor(img[..., :3], cv2.COLOR_BGR2RGB)
    return img


def write_image(path: str | Path, image: np.ndarray) -> None:
    """Write an RGB or single-channel uint8/uint16 image as PNG."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    img = image
    if img.ndim == 3:
        img = cv2.cvtColor(np.ascontiguousarray(img), cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(p), img):
        raise OSError(f"Failed to write image: {p}")


def frame_paths(directory: str | Path) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(str(d))
    return sorted(d.glob("*.png"))


def read_frames(
    directory: str | Path, fs: float, view_id: int = 0, max_frames: int | None = None
) -> RgbFrameSequence:
    """Load a zero-padded PNG sequence into ``(T, H, W, 3)``, keeping the source dtype."""
    paths = frame_paths(directory)
    if max_frames is not None:
        paths = paths[:max_frames]
    if not paths:
        raise CorruptFileError(f"No PNG frames in {directory}")
    first = read_image(paths[0])
    if first.ndim != 3:
        raise CorruptFileError(f"Frame {paths[0]} is not an RGB image")
    frames = np.empty((len(paths), *first.shape), dtype=first.dtype)
    frames[0] = first
    for i, p in enumerate(paths[1:], start=1):
        img = read_image(p)
        if img.shape != first.shape:
            raise CorruptFileError(f"Frame {p} has shape {img.shape}, expected {first.shape}")
        frames[i] = img
    logger.debug(f"Read {len(paths)} frames from {directory}")
    return RgbFrameSequence(frames, fs, view_id)


def write_frame(directory: str | Path, index: int, rgb: np.ndarray) -> Path:
    path = Path(directory) / FRAME_PATTERN.format(index=index)
    write_image(path, rgb)
    return path


def read_mask(path: str | Path) -> SkinMask:
    """8-bit single-channel PNG; nonzero pixels are skin."""
    img = read_image(path)
    if img.ndim == 3:
        img = img.max(axis=2)
    return SkinMask(img > 0)


def write_mask(path: str | Path, mask: SkinMask) -> None:
    write_image(path, mask.values.astype(np.uint8) * 255)
