"""Hysteresis grouping of per-frame artifact probabilities into clips."""

from __future__ import annotations

from typing import List, NamedTuple, Sequence

TAU_HIGH = 0.65
TAU_LOW = 0.5
MIN_CLIP_LEN = 8
PADDING = 4


class Clip(NamedTuple):
    """Inclusive 1-based frame interval."""

    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def covers(self, t: int) -> bool:
        return self.start <= t <= self.end

    def pairs(self) -> list:
        return [(t, t + 1) for t in range(self.start, self.end)]


def merge_clips(clips: Sequence[Clip]) -> List[Clip]:
    """Merge overlapping or touching clips into a sorted disjoint list."""
    merged: List[Clip] = []
    for c in sorted(clips):
        if merged and c.start <= merged[-1].end + 1:
            last = merged[-1]
            merged[-1] = Clip(last.start, max(last.end, c.end))
        else:
            merged.append(c)
    return merged


def raw_clips(probs: Sequence[float], tau_high: float, tau_low: float) -> List[Clip]:
    """Unfiltered, unpadded hysteresis runs.

    A clip opens at the first frame with ``p >= tau_high`` while inactive and
    ends at the last frame before ``p`` drops below ``tau_low``.  A clip still
    open at the final frame closes there.
    """
    out: List[Clip] = []
    active = False
    start = 0
    for t, p in enumerate(probs, start=1):
        if not active and p >= tau_high:
            start, active = t, True
        elif active and p < tau_low:
            out.append(Clip(start, t - 1))
            active = False
    if active:
        out.append(Clip(start, len(probs)))
    return out


def hysteresis_clips(
    probs: Sequence[float],
    tau_high: float = TAU_HIGH,
    tau_low: float = TAU_LOW,
    l_min: int = MIN_CLIP_LEN,
    padding: int = PADDING,
) -> List[Clip]:
    if not 0.0 < tau_low <= tau_high < 1.0:
        raise ValueError(f"need 0 < tau_low <= tau_high < 1, got {tau_low}, {tau_high}")
    if l_min < 1:
        raise ValueError("l_min must be >= 1")
    if padding < 0:
        raise ValueError("padding must be >= 0")
    n = len(probs)
    kept = [
        Clip(max(1, c.start - padding), min(n, c.end + padding))
        for c in raw_clips(probs, tau_high, tau_low)
        if c.length >= l_min
    ]
    return merge_clips(kept)
