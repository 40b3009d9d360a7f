"""PLCC/SRCC harness pairing predicted scores with ground-truth MOS."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)


class CorrelationError(ValueError):
    """Correlation is undefined for the given inputs."""


def _pair(x: Sequence[float], y: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise CorrelationError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise CorrelationError("need at least two samples")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise CorrelationError("inputs must be finite")
    return a, b


def plcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson linear correlation; zero-variance input raises."""
    a, b = _pair(x, y)
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.dot(da, da)), np.sqrt(np.dot(db, db))
    if sa == 0.0 or sb == 0.0:
        raise CorrelationError("zero variance input")
    r = float(np.dot(da, db) / (sa * sb))
    return max(-1.0, min(1.0, r))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    a = np.asarray(x, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(a.size, dtype=np.float64)
    sorted_vals = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def srcc(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _pair(x, y)
    return plcc(average_ranks(a), average_ranks(b))


@dataclass
class EvalResult:
    plcc: float
    srcc: float
    n: int
    skipped: List[str] = field(default_factory=list)
    pairs: List[Tuple[str, float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "plcc": self.plcc,
            "srcc": self.srcc,
            "n": self.n,
            "skipped": list(self.skipped),
            "pairs": [{"video_dir": v, "predicted": p, "mos": m} for v, p, m in self.pairs],
        }

    def table(self) -> str:
        lines = [f"{'metric':<8}{'value':>10}", f"{'PLCC':<8}{self.plcc:>10.4f}",
                 f"{'SRCC':<8}{self.srcc:>10.4f}", f"{'n':<8}{self.n:>10d}"]
        if self.skipped:
            lines.append(f"{'skipped':<8}{len(self.skipped):>10d}")
        return "\n".join(lines) + "\n"


def read_manifest(path) -> List[Tuple[str, float]]:
    """Rows of ``(video_dir, mos)`` from a CSV with header ``video_dir,mos``.

    Relative ``video_dir`` entries resolve against the manifest's directory.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"video_dir", "mos"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: manifest header must contain video_dir,mos")
        for rec in reader:
            video = Path(rec["video_dir"])
            if not video.is_absolute():
                video = path.parent / video
            rows.append((str(video), float(rec["mos"])))
    return rows


def evaluate_manifest(
    manifest: Sequence[Tuple[str, float]],
    pipeline: Callable[[str], float],
) -> EvalResult:
    """Score every entry with ``pipeline`` and correlate against MOS.

    Entries whose pipeline call raises ``OSError`` or ``ValueError`` are
    skipped with a warning and reported in ``skipped``.
    """
    pairs, skipped = [], []
    for video, mos in manifest:
        try:
            pred = float(pipeline(video))
        except (OSError, ValueError) as exc:
            log.warning("skipping %s: %s", video, exc)
            skipped.append(video)
            continue
        pairs.append((video, pred, float(mos)))
    preds = [p for _, p, _ in pairs]
    moss = [m for _, _, m in pairs]
    return EvalResult(plcc(preds, moss), srcc(preds, moss), len(pairs), skipped, pairs)
