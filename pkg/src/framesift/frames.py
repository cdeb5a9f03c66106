"""Frame data model and image file I/O.

Frames are 8-bit grayscale images. Supported on-disk formats are binary
PGM (P5, maxval up to 255) and PNG; color inputs are converted to
grayscale with Rec.601 luma weights, rounded half away from zero.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FrameDecodeError, FrameFormatError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# Rec.601 luma weights for RGB -> grayscale.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class Frame:
    """A single grayscale frame: a read-only (height, width) uint8 array.

    Equality is by pixel content; source_path is bookkeeping only.
    """

    pixels: np.ndarray
    source_path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame dimensions must be >= 1, got {px.shape}")
        px.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) uint8 array to grayscale.

    Uses Rec.601 luma (0.299 R + 0.587 G + 0.114 B) rounded half away
    from zero, so equal-channel pixels map to their common value.
    """
    luma = rgb.astype(np.float64) @ _LUMA_WEIGHTS
    return np.floor(luma + 0.5).astype(np.uint8)


def resolve_locator(locator: str | Path, base_dir: str | Path | None = None) -> Path:
    """Resolve a frame locator; relative paths are joined onto base_dir."""
    p = Path(locator)
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    return p


def load_frame(locator: str | Path, base_dir: str | Path | None = None) -> Frame:
    """Load a frame from a PGM (P5) or PNG file.

    The format is detected from the file's magic bytes, not its
    extension. Color images are converted with :func:`rgb_to_gray`.
    """
    path = resolve_locator(locator, base_dir)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FrameDecodeError(f"cannot read {path}: {e}") from e

    if data[:2] == b"P5":
        pixels = _decode_pgm(data, path)
    elif data[:8] == _PNG_SIGNATURE:
        pixels = _decode_png(data, path)
    else:
        raise FrameFormatError(f"{path}: not a P5 PGM or PNG file")
    return Frame(pixels=pixels, source_path=str(locator))


def save_frame(frame: Frame, path: str | Path) -> None:
    """Write a frame as PGM (.pgm) or PNG (any other extension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
        path.write_bytes(header + frame.pixels.tobytes())
    else:
        Image.fromarray(frame.pixels, mode="L").save(path)


def _decode_pgm(data: bytes, path: Path) -> np.ndarray:
    """Decode a binary PGM (P5). Header tokens may be separated by
    whitespace and '#' comments; maxval must fit in 8 bits."""
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FrameDecodeError(f"{path}: truncated PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError:
            raise FrameDecodeError(f"{path}: bad PGM header token {data[start:pos]!r}") from None
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise FrameDecodeError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise FrameFormatError(f"{path}: PGM maxval {maxval} not supported (8-bit only)")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) < width * height:
        raise FrameDecodeError(
            f"{path}: truncated PGM raster ({len(raster)} of {width * height} bytes)"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def _decode_png(data: bytes, path: Path) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            if img.mode == "L":
                return np.asarray(img, dtype=np.uint8).copy()
            if img.mode in ("P", "RGBA", "LA"):
                img = img.convert("RGB")
            if img.mode == "RGB":
                return rgb_to_gray(np.asarray(img, dtype=np.uint8))
            raise FrameFormatError(f"{path}: unsupported PNG mode {img.mode} (8-bit only)")
    except UnidentifiedImageError as e:
        raise FrameDecodeError(f"{path}: undecodable PNG: {e}") from e
    except OSError as e:
        raise FrameDecodeError(f"{path}: truncated or corrupt PNG: {e}") from e
