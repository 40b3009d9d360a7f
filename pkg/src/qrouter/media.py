"""Frame ingestion, PPM/PGM I/O and the color conversions shared by every stage.

Frames are ``uint8`` arrays of shape ``(height, width, 3)``; gray frames are
``uint8`` arrays of shape ``(height, width)``.  Frame indices exposed to the
rest of the package are 1-based.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Union

import numpy as np

PathLike = Union[str, Path]

LUMA_COEFFS = (0.299, 0.587, 0.114)
DEFAULT_HSV_BINS = (8, 4, 4)

_FRAME_NAME = re.compile(r"^(\d+)\.ppm$")


class MediaError(ValueError):
    """Raised for unreadable frame directories and malformed image files."""


@dataclass
class FrameSequence:
    """Ordered list of equally sized RGB frames (1-based indexing via ``frame``)."""

    frames: List[np.ndarray]

    def __post_init__(self) -> None:
        if not self.frames:
            raise MediaError("no frames")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames, start=1):
            if f.ndim != 3 or f.shape[2] != 3 or f.dtype != np.uint8:
                raise MediaError(f"frame {i} is not an 8-bit RGB array")
            if f.shape != shape:
                raise MediaError(
                    f"dimension mismatch: frame {i} is {f.shape[1]}x{f.shape[0]}, "
                    f"expected {shape[1]}x{shape[0]}"
                )
        if shape[0] < 1 or shape[1] < 1:
            raise MediaError("frames must have positive width and height")

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.frames)

    def frame(self, t: int) -> np.ndarray:
        """Return frame ``t`` (1-based)."""
        if not 1 <= t <= len(self.frames):
            raise IndexError(f"frame index {t} outside 1..{len(self.frames)}")
        return self.frames[t - 1]

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


# --------------------------------------------------------------------------
# Netpbm I/O
# --------------------------------------------------------------------------


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MediaError("truncated header")
    return data[start:pos], pos


def _parse_netpbm(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    tok, pos = _read_token(data, 0)
    if tok != magic:
        raise MediaError(f"bad magic {tok!r}, expected {magic!r}")
    try:
        w_tok, pos = _read_token(data, pos)
        h_tok, pos = _read_token(data, pos)
        m_tok, pos = _read_token(data, pos)
        width, height, maxval = int(w_tok), int(h_tok), int(m_tok)
    except ValueError as exc:
        raise MediaError(f"malformed header: {exc}") from exc
    if width <= 0 or height <= 0:
        raise MediaError("non-positive image dimensions")
    if maxval != 255:
        raise MediaError(f"only maxval 255 is supported, got {maxval}")
    # exactly one whitespace byte separates header and raster
    pos += 1
    expected = width * height * channels
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise MediaError(f"raster has {len(raster)} bytes, expected {expected}")
    arr = np.frombuffer(raster, dtype=np.uint8).copy()
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, channels)


def read_ppm(path: PathLike) -> np.ndarray:
    """Read a binary (P6) PPM file into an ``(H, W, 3)`` uint8 array."""
    return _parse_netpbm(Path(path).read_bytes(), b"P6", 3)


def read_pgm(path: PathLike) -> np.ndarray:
    """Read a binary (P5) PGM file into an ``(H, W)`` uint8 array."""
    return _parse_netpbm(Path(path).read_bytes(), b"P5", 1)


def write_ppm(path: PathLike, frame: np.ndarray) -> Path:
    frame = np.ascontiguousarray(frame, dtype=np.uint8)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise MediaError("PPM output needs an (H, W, 3) array")
    h, w = frame.shape[:2]
    path = Path(path)
    path.write_bytes(b"P6\n%d %d\n255\n" % (w, h) + frame.tobytes())
    return path


def write_pgm(path: PathLike, gray: np.ndarray) -> Path:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise MediaError("PGM output needs an (H, W) array")
    h, w = gray.shape
    path = Path(path)
    path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + gray.tobytes())
    return path


def encode_ppm(frame: np.ndarray) -> bytes:
    frame = np.ascontiguousarray(frame, dtype=np.uint8)
    h, w = frame.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + frame.tobytes()


def load_frame_dir(path: PathLike) -> FrameSequence:
    """Load every ``NNNN.ppm`` file in ``path`` ordered by its numeric index."""
    root = Path(path)
    if not root.is_dir():
        raise MediaError(f"missing frame directory: {root}")
    indexed = []
    for entry in root.iterdir():
        m = _FRAME_NAME.match(entry.name)
        if m and entry.is_file():
            indexed.append((int(m.group(1)), entry))
    if not indexed:
        raise MediaError(f"no frames in {root}")
    indexed.sort(key=lambda item: item[0])
    frames = []
    for _, entry in indexed:
        try:
            frames.append(read_ppm(entry))
        except MediaError as exc:
            raise MediaError(f"{entry.name}: {exc}") from exc
    return FrameSequence(frames)


def save_frame_dir(path: PathLike, frames: Sequence[np.ndarray]) -> Path:
    """Write frames as ``0001.ppm``, ``0002.ppm``, ... into ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames, start=1):
        write_ppm(root / f"{i:04d}.ppm", frame)
    return root


# --------------------------------------------------------------------------
# Color conversions
# --------------------------------------------------------------------------


def luma(frame: np.ndarray) -> np.ndarray:
    """Unrounded BT.601 luma as float64."""
    rgb = np.asarray(frame, dtype=np.float64)
    r, g, b = LUMA_COEFFS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def to_gray(frame: np.ndarray) -> np.ndarray:
    """BT.601 luma rounded half-up and clamped to ``[0, 255]``."""
    y = np.floor(luma(frame) + 0.5)
    return np.clip(y, 0, 255).astype(np.uint8)


def rgb_to_hsv(frame: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV with H in degrees ``[0, 360)`` and S, V in ``[0, 1]``.

    Achromatic pixels get hue 0 and black pixels get saturation 0.
    """
    rgb = np.asarray(frame, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    cmax = rgb.max(axis=-1)
    cmin = rgb.min(axis=-1)
    delta = cmax - cmin

    hue = np.zeros_like(cmax)
    chroma = delta > 0
    safe = np.where(chroma, delta, 1.0)
    r_max = chroma & (cmax == r)
    g_max = chroma & (cmax == g) & ~r_max
    b_max = chroma & ~r_max & ~g_max
    hue[r_max] = (60.0 * ((g - b) / safe))[r_max] % 360.0
    hue[g_max] = (60.0 * ((b - r) / safe) + 120.0)[g_max]
    hue[b_max] = (60.0 * ((r - g) / safe) + 240.0)[b_max]
    hue = np.where(hue >= 360.0, hue - 360.0, hue)

    sat = np.where(cmax > 0, delta / np.where(cmax > 0, cmax, 1.0), 0.0)
    return np.stack([hue, sat, cmax], axis=-1)


def to_hsv_histogram(
    frame: np.ndarray,
    bins_h: int = DEFAULT_HSV_BINS[0],
    bins_s: int = DEFAULT_HSV_BINS[1],
    bins_v: int = DEFAULT_HSV_BINS[2],
) -> np.ndarray:
    """L1-normalized joint HSV histogram of shape ``(bins_h, bins_s, bins_v)``."""
    if min(bins_h, bins_s, bins_v) < 1:
        raise ValueError("bin counts must be >= 1")
    hsv = rgb_to_hsv(frame).reshape(-1, 3)
    hi = np.minimum((hsv[:, 0] / 360.0 * bins_h).astype(np.int64), bins_h - 1)
    si = np.minimum((hsv[:, 1] * bins_s).astype(np.int64), bins_s - 1)
    vi = np.minimum((hsv[:, 2] * bins_v).astype(np.int64), bins_v - 1)
    flat = (hi * bins_s + si) * bins_v + vi
    counts = np.bincount(flat, minlength=bins_h * bins_s * bins_v).astype(np.float64)
    return (counts / counts.sum()).reshape(bins_h, bins_s, bins_v)
