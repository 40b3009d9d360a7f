"""Diversified frame selection: top-K, HSV farthest-point sampling, shot boundaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Set

import numpy as np

from .features import FEATURE_INDEX, bhattacharyya

THETA_SHOT = 0.5
K_TOP = 8
K_FPS = 8


@dataclass(frozen=True)
class SelectionBudget:
    k_top: int = K_TOP
    k_fps: int = K_FPS

    def __post_init__(self) -> None:
        if self.k_top < 0 or self.k_fps < 0:
            raise ValueError("selection budgets must be non-negative")


def top_k(probs: Sequence[float], k: int) -> Set[int]:
    """Indices (1-based) of the ``k`` most probable frames; ties favour earlier frames."""
    if k < 0:
        raise ValueError("k must be >= 0")
    order = sorted(range(1, len(probs) + 1), key=lambda t: (-probs[t - 1], t))
    return set(order[:k])


def fps_hsv(
    candidates: Iterable[int],
    histograms: Sequence[np.ndarray],
    probs: Sequence[float],
    k: int,
) -> List[int]:
    """Greedy farthest-point sampling under Bhattacharyya distance.

    The seed is the most probable candidate; each later pick maximizes its
    minimum distance to the picks so far.  Ties go to the lower frame index.
    Returns frame indices in pick order.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    pool = sorted(set(candidates))
    if k == 0 or not pool:
        return []
    seed = min(pool, key=lambda t: (-probs[t - 1], t))
    picked = [seed]
    remaining = [t for t in pool if t != seed]
    min_dist = {t: bhattacharyya(histograms[seed - 1], histograms[t - 1]) for t in remaining}
    while remaining and len(picked) < k:
        best = min(remaining, key=lambda t: (-min_dist[t], t))
        picked.append(best)
        remaining.remove(best)
        for t in remaining:
            d = bhattacharyya(histograms[best - 1], histograms[t - 1])
            if d < min_dist[t]:
                min_dist[t] = d
    return picked


def shot_boundaries(matrix: np.ndarray, theta_shot: float = THETA_SHOT) -> Set[int]:
    """Frames whose histogram distance to the previous frame exceeds ``theta_shot``."""
    if theta_shot <= 0:
        raise ValueError("theta_shot must be > 0")
    col = np.asarray(matrix)[:, FEATURE_INDEX["hist_dist_prev"]]
    return {int(t) + 1 for t in np.flatnonzero(col > theta_shot)}


def diversified_selection(
    probs: Sequence[float],
    histograms: Sequence[np.ndarray],
    matrix: np.ndarray,
    budget: Optional[SelectionBudget] = None,
    theta_shot: float = THETA_SHOT,
) -> List[int]:
    """Sorted union of top-K, FPS-diverse and shot-boundary frames."""
    budget = budget or SelectionBudget()
    frames = range(1, len(probs) + 1)
    chosen = top_k(probs, budget.k_top)
    chosen.update(fps_hsv(frames, histograms, probs, budget.k_fps))
    chosen.update(shot_boundaries(matrix, theta_shot))
    return sorted(chosen)
