"""Per-frame low-level artifact features.

Each frame yields a 7-vector ``[diff_mean, lap_var, grad_kurtosis,
edge_density, hist_dist_prev, face, text]``.  The feature matrix is a
``(T, 7)`` float64 array whose row ``t - 1`` belongs to frame ``t``.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .media import FrameSequence, to_gray, to_hsv_histogram

FEATURE_NAMES = (
    "diff_mean",
    "lap_var",
    "grad_kurtosis",
    "edge_density",
    "hist_dist_prev",
    "face",
    "text",
)
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

BC_FLOOR = 1e-12

CANNY_SIGMA = 1.4
CANNY_LOW = 50.0
CANNY_HIGH = 150.0
NMS_RTOL = 1e-9

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()

PriorFn = Callable[[np.ndarray], float]


def _as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 3:
        img = to_gray(img)
    return img.astype(np.float64)


def motion_residual(prev: np.ndarray, cur: np.ndarray) -> float:
    """Mean absolute luma difference between two frames (RGB or gray)."""
    a, b = _as_gray(prev), _as_gray(cur)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(b - a).mean())


def laplacian_response(gray: np.ndarray) -> np.ndarray:
    """4-neighbour Laplacian evaluated on interior pixels only."""
    g = _as_gray(gray)
    return (
        g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4.0 * g[1:-1, 1:-1]
    )


def laplacian_variance(gray: np.ndarray) -> float:
    g = _as_gray(gray)
    if g.shape[0] < 3 or g.shape[1] < 3:
        return 0.0
    return float(np.var(laplacian_response(g)))


def sobel_interior(gray: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sobel x/y derivatives on interior pixels (no border handling needed)."""
    g = _as_gray(gray)
    gx = (g[:-2, 2:] + 2.0 * g[1:-1, 2:] + g[2:, 2:]) - (
        g[:-2, :-2] + 2.0 * g[1:-1, :-2] + g[2:, :-2]
    )
    gy = (g[2:, :-2] + 2.0 * g[2:, 1:-1] + g[2:, 2:]) - (
        g[:-2, :-2] + 2.0 * g[:-2, 1:-1] + g[:-2, 2:]
    )
    return gx, gy


def kurtosis(values: np.ndarray) -> float:
    """Non-excess kurtosis ``E[(x - mu)^4] / sigma^4``; 0 when sigma is 0."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        return 0.0
    dev = x - x.mean()
    var = float(np.mean(dev * dev))
    if var == 0.0:
        return 0.0
    return float(np.mean(dev**4) / (var * var))


def gradient_kurtosis(gray: np.ndarray) -> float:
    g = _as_gray(gray)
    if g.shape[0] < 3 or g.shape[1] < 3:
        return 0.0
    gx, gy = sobel_interior(g)
    return kurtosis(np.hypot(gx, gy))


def gaussian_kernel(sigma: float = CANNY_SIGMA, radius: int = 2) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k2 = np.outer(k1, k1)
    return k2 / k2.sum()


def canny(
    gray: np.ndarray,
    low: float = CANNY_LOW,
    high: float = CANNY_HIGH,
    sigma: float = CANNY_SIGMA,
) -> np.ndarray:
    """Boolean Canny edge map.

    5x5 Gaussian blur, full-frame Sobel with replicated borders,
    4-direction non-maximum suppression on interior pixels and 8-connected
    hysteresis between ``low`` and ``high`` (0-255 magnitude scale).
    """
    g = _as_gray(gray)
    h, w = g.shape
    edges = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return edges

    blurred = ndimage.correlate(g, gaussian_kernel(sigma), mode="nearest")
    gx = ndimage.correlate(blurred, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(blurred, SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0

    # neighbour offsets along the gradient direction (rows grow downward)
    c = mag[1:-1, 1:-1]
    a = angle[1:-1, 1:-1]
    horiz = (a < 22.5) | (a >= 157.5)
    diag = (a >= 22.5) & (a < 67.5)
    vert = (a >= 67.5) & (a < 112.5)
    anti = (a >= 112.5) & (a < 157.5)

    n1 = np.empty_like(c)
    n2 = np.empty_like(c)
    n1[horiz], n2[horiz] = mag[1:-1, :-2][horiz], mag[1:-1, 2:][horiz]
    n1[diag], n2[diag] = mag[:-2, :-2][diag], mag[2:, 2:][diag]
    n1[vert], n2[vert] = mag[:-2, 1:-1][vert], mag[2:, 1:-1][vert]
    n1[anti], n2[anti] = mag[:-2, 2:][anti], mag[2:, :-2][anti]

    # mathematically tied neighbours both survive regardless of summation order
    tol = NMS_RTOL * c
    keep = (c > 0) & (c >= n1 - tol) & (c >= n2 - tol)
    nms = np.zeros_like(mag)
    nms[1:-1, 1:-1] = np.where(keep, c, 0.0)

    weak = nms >= low
    strong = nms >= high
    if not strong.any():
        return edges
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    keep_labels = np.zeros(n + 1, dtype=bool)
    keep_labels[np.unique(labels[strong])] = True
    keep_labels[0] = False
    return keep_labels[labels]


def edge_density(gray: np.ndarray) -> float:
    g = _as_gray(gray)
    if g.shape[0] < 3 or g.shape[1] < 3:
        return 0.0
    return float(canny(g).sum()) / g.size


def bhattacharyya(h1: np.ndarray, h2: np.ndarray) -> float:
    """``-ln(sum(sqrt(h1 * h2)))`` with the coefficient clamped to ``[1e-12, 1]``."""
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"histogram bin layout mismatch: {a.shape} vs {b.shape}")
    if np.array_equal(a, b):
        return 0.0
    bc = float(np.sqrt(a * b).sum())
    bc = min(1.0, max(bc, BC_FLOOR))
    return max(0.0, -math.log(bc))


def content_priors(
    frame: np.ndarray,
    face_detector: Optional[PriorFn] = None,
    text_detector: Optional[PriorFn] = None,
) -> Tuple[float, float]:
    """Face/text priors; ``(0, 0)`` unless detectors are plugged in."""
    face = float(face_detector(frame)) if face_detector is not None else 0.0
    text = float(text_detector(frame)) if text_detector is not None else 0.0
    return min(1.0, max(0.0, face)), min(1.0, max(0.0, text))


def frame_histograms(seq: FrameSequence, bins: Sequence[int] = (8, 4, 4)) -> list:
    return [to_hsv_histogram(f, *bins) for f in seq]


def extract_features(
    seq: FrameSequence,
    histograms: Optional[Sequence[np.ndarray]] = None,
    face_detector: Optional[PriorFn] = None,
    text_detector: Optional[PriorFn] = None,
) -> np.ndarray:
    """Build the ``(T, 7)`` feature matrix for a frame sequence."""
    if histograms is None:
        histograms = frame_histograms(seq)
    if len(histograms) != len(seq):
        raise ValueError("one histogram per frame is required")

    rows = np.zeros((len(seq), N_FEATURES), dtype=np.float64)
    prev_gray = None
    for i, frame in enumerate(seq):
        gray = to_gray(frame).astype(np.float64)
        row = rows[i]
        if prev_gray is not None:
            row[0] = motion_residual(prev_gray, gray)
            row[4] = bhattacharyya(histograms[i - 1], histograms[i])
        row[1] = laplacian_variance(gray)
        row[2] = gradient_kurtosis(gray)
        row[3] = edge_density(gray)
        row[5], row[6] = content_priors(frame, face_detector, text_detector)
        prev_gray = gray
    return rows
