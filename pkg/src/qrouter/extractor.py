"""Median/IQR feature normalization and weighted-logistic frame scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FEATURE_INDEX, N_FEATURES

IQR_EPS = 1e-6

# logistic outputs are kept strictly inside (0, 1)
_P_MIN = np.finfo(np.float64).tiny
_P_MAX = 1.0 - np.finfo(np.float64).epsneg


def _default_w() -> np.ndarray:
    w = np.zeros(N_FEATURES)
    w[FEATURE_INDEX["diff_mean"]] = 0.8
    w[FEATURE_INDEX["grad_kurtosis"]] = 0.6
    w[FEATURE_INDEX["hist_dist_prev"]] = 1.0
    return w


@dataclass
class ScoringWeights:
    w: np.ndarray = field(default_factory=_default_w)
    b: float = 0.0

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.shape != (N_FEATURES,):
            raise ValueError(f"weight vector must have length {N_FEATURES}")
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise ValueError("scoring weights must be finite")
        self.b = float(self.b)

    @classmethod
    def from_dict(cls, data: dict) -> "ScoringWeights":
        """Accepts ``{"w": [...7 values...], "b": 0.0}`` or a name->weight map in ``w``."""
        w = data.get("w")
        if isinstance(w, dict):
            vec = np.zeros(N_FEATURES)
            for name, value in w.items():
                if name not in FEATURE_INDEX:
                    raise ValueError(f"unknown feature {name!r}")
                vec[FEATURE_INDEX[name]] = float(value)
            w = vec
        elif w is None:
            w = _default_w()
        return cls(w=w, b=data.get("b", 0.0))


def default_weights() -> ScoringWeights:
    return ScoringWeights()


def robust_normalize(matrix: np.ndarray, eps: float = IQR_EPS) -> np.ndarray:
    """Column-wise ``(x - median) / max(IQR, eps)`` using linear-interpolation quantiles."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("expected a (T, D) matrix with T >= 1")
    med = np.median(x, axis=0)
    q1, q3 = np.percentile(x, [25.0, 75.0], axis=0)
    return (x - med) / np.maximum(q3 - q1, eps)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_score(normalized: np.ndarray, weights: ScoringWeights | None = None) -> np.ndarray:
    """Per-frame artifact probability ``sigmoid(w . x + b)``; index ``t - 1`` is frame ``t``."""
    weights = weights or default_weights()
    x = np.asarray(normalized, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != weights.w.size:
        raise ValueError(f"expected (T, {weights.w.size}) normalized features")
    z = x @ weights.w + weights.b
    return np.clip(sigmoid(z), _P_MIN, _P_MAX)


def frame_probabilities(matrix: np.ndarray, weights: ScoringWeights | None = None) -> np.ndarray:
    return logistic_score(robust_normalize(matrix), weights)


def as_pairs(probs: Sequence[float]) -> list:
    """``[(t, p_t), ...]`` with 1-based frame indices."""
    return [(t, float(p)) for t, p in enumerate(probs, start=1)]
