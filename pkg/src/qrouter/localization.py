"""Tier-2 artifact localization.

Frames flagged by the VLM keep their clips alive; inside each surviving clip
every consecutive pair is motion-compensated (block-matching flow + bilinear
backward warp), compared with a perceptual-difference backend, normalized to a
``[0, 1]`` heatmap and mean-pooled into a severity.  The strongest pair per
clip is written out as a PGM heatmap and a PPM overlay, and a JSON summary
lists every clip.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .clients import ArtifactLabel
from .clips import PADDING, MIN_CLIP_LEN, TAU_HIGH, TAU_LOW, Clip, hysteresis_clips
from .extractor import ScoringWeights, frame_probabilities
from .features import SOBEL_X, SOBEL_Y, extract_features, frame_histograms
from .media import FrameSequence, PathLike, luma, write_pgm, write_ppm
from .selection import THETA_SHOT, SelectionBudget, diversified_selection

log = logging.getLogger(__name__)

BLOCK_SIZE = 8
SEARCH_RADIUS = 7
ALPHA = 0.5
SUMMARY_NAME = "localization.json"

FlowBackend = Callable[[np.ndarray, np.ndarray], np.ndarray]
MetricBackend = Callable[[np.ndarray, np.ndarray], np.ndarray]


# --------------------------------------------------------------------------
# VLM filtering
# --------------------------------------------------------------------------


def vlm_filter(selected: Sequence[int], seq: FrameSequence, client) -> Dict[int, ArtifactLabel]:
    """Label every selected frame with ``client.classify(frame)``."""
    return {t: client.classify(seq.frame(t)) for t in sorted(selected)}


def restrict_clips(clips: Sequence[Clip], labels: Mapping[int, ArtifactLabel]) -> List[Clip]:
    flagged = [t for t, lab in labels.items() if lab.flagged]
    return [c for c in clips if any(c.covers(t) for t in flagged)]


# --------------------------------------------------------------------------
# Motion compensation
# --------------------------------------------------------------------------


def block_matching_flow(
    f1: np.ndarray,
    f2: np.ndarray,
    block: int = BLOCK_SIZE,
    radius: int = SEARCH_RADIUS,
) -> np.ndarray:
    """Integer block-matching flow on luma.

    For every ``block x block`` tile of ``f1`` the displacement ``(dx, dy)``
    within ``radius`` minimizing the SAD against ``f2`` is kept; candidate
    tiles must lie fully inside ``f2``.  Ties prefer the smallest
    displacement.  Returns an ``(H, W, 2)`` array of ``(dx, dy)`` per pixel,
    meaning ``f1[y, x] ~ f2[y + dy, x + dx]``.
    """
    y1, y2 = luma(f1), luma(f2)
    if y1.shape != y2.shape:
        raise ValueError(f"dimension mismatch: {y1.shape} vs {y2.shape}")
    h, w = y1.shape
    nby, nbx = -(-h // block), -(-w // block)
    ph, pw = nby * block, nbx * block

    padded2 = np.full((h + 2 * radius, w + 2 * radius), np.nan)
    padded2[radius : radius + h, radius : radius + w] = y2

    best_sad = np.full((nby, nbx), np.inf)
    best = np.zeros((nby, nbx, 2))
    offsets = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    offsets.sort(key=lambda d: (d[0] * d[0] + d[1] * d[1], d[1], d[0]))
    for dx, dy in offsets:
        shifted = padded2[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
        diff = np.abs(y1 - shifted)
        diff = np.where(np.isnan(diff), np.inf, diff)
        tiled = np.zeros((ph, pw))
        tiled[:h, :w] = diff
        sad = tiled.reshape(nby, block, nbx, block).sum(axis=(1, 3))
        better = sad < best_sad
        best_sad[better] = sad[better]
        best[better] = (dx, dy)

    flow = np.repeat(np.repeat(best, block, axis=0), block, axis=1)
    return flow[:h, :w].copy()


def estimate_flow(f1: np.ndarray, f2: np.ndarray, backend: Optional[FlowBackend] = None) -> np.ndarray:
    backend = backend or block_matching_flow
    if f1.shape != f2.shape:
        raise ValueError(f"dimension mismatch: {f1.shape} vs {f2.shape}")
    flow = np.asarray(backend(f1, f2), dtype=np.float64)
    if flow.shape != f1.shape[:2] + (2,):
        raise ValueError(f"flow backend returned shape {flow.shape}, expected {f1.shape[:2] + (2,)}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow backend returned non-finite displacements")
    return flow


def warp(f2: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward bilinear warp: ``out[y, x] = f2(y + dy, x + dx)``, border-clamped."""
    h, w = f2.shape[:2]
    if flow.shape != (h, w, 2):
        raise ValueError("flow grid does not match the frame")
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = np.clip(gx + flow[..., 0], 0.0, w - 1)
    ys = np.clip(gy + flow[..., 1], 0.0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    src = f2.astype(np.float64)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# Perceptual difference maps
# --------------------------------------------------------------------------


def _sobel_magnitude(y: np.ndarray) -> np.ndarray:
    gx = ndimage.correlate(y, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(y, SOBEL_Y, mode="nearest")
    return np.hypot(gx, gy)


def proxy_perceptual_map(f1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Deterministic stand-in for a spatial learned metric.

    ``0.5 * box3(|dY|) + 0.5 * box3(|dG|)`` where ``Y`` is luma and ``G`` the
    Sobel gradient magnitude, both with replicated borders.
    """
    y1, y2 = luma(f1), luma(w2)
    box = np.full((3, 3), 1.0 / 9.0)
    d_luma = ndimage.correlate(np.abs(y1 - y2), box, mode="nearest")
    d_grad = ndimage.correlate(np.abs(_sobel_magnitude(y1) - _sobel_magnitude(y2)), box, mode="nearest")
    return 0.5 * d_luma + 0.5 * d_grad


def perceptual_map(f1: np.ndarray, w2: np.ndarray, metric: Optional[MetricBackend] = None) -> np.ndarray:
    if f1.shape != w2.shape:
        raise ValueError(f"dimension mismatch: {f1.shape} vs {w2.shape}")
    raw = np.asarray((metric or proxy_perceptual_map)(f1, w2), dtype=np.float64)
    if raw.shape != f1.shape[:2]:
        raise ValueError(f"metric backend returned shape {raw.shape}, expected {f1.shape[:2]}")
    return raw


def normalize_map(h: np.ndarray) -> np.ndarray:
    """Min-max scale to ``[0, 1]``; a constant map becomes all zeros."""
    h = np.asarray(h, dtype=np.float64)
    if not np.all(np.isfinite(h)):
        raise ValueError("map contains non-finite values")
    lo, hi = float(h.min()), float(h.max())
    if hi <= lo:
        return np.zeros_like(h)
    return np.clip((h - lo) / (hi - lo), 0.0, 1.0)


def severity(hm: np.ndarray) -> float:
    return float(np.mean(hm))


def colormap(hm: np.ndarray) -> np.ndarray:
    """Blue -> green -> red ramp over ``[0, 0.5, 1]``, float RGB in ``[0, 255]``."""
    v = np.clip(np.asarray(hm, dtype=np.float64), 0.0, 1.0)
    lo = v <= 0.5
    r = np.where(lo, 0.0, 255.0 * (2.0 * v - 1.0))
    g = np.where(lo, 255.0 * 2.0 * v, 255.0 * (2.0 - 2.0 * v))
    b = np.where(lo, 255.0 * (1.0 - 2.0 * v), 0.0)
    return np.stack([r, g, b], axis=-1)


def render_overlay(f1: np.ndarray, hm: np.ndarray, alpha: float = ALPHA) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    blend = (1.0 - alpha) * f1.astype(np.float64) + alpha * colormap(hm)
    return np.clip(np.floor(blend + 0.5), 0, 255).astype(np.uint8)


def heatmap_to_gray(hm: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(hm) * 255.0 + 0.5), 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# Per-clip evaluation
# --------------------------------------------------------------------------


@dataclass
class PairScore:
    pair: Tuple[int, int]
    severity: float
    heatmap: np.ndarray


@dataclass
class ClipResult:
    clip: Clip
    severity: float
    pair: Tuple[int, int]
    label: ArtifactLabel
    heatmap_path: Path
    overlay_path: Path
    flagged_frames: List[int] = field(default_factory=list)

    def to_json(self, root: Optional[Path] = None) -> dict:
        def rel(p: Path) -> str:
            return str(p.relative_to(root)) if root is not None else str(p)

        return {
            "clip": [self.clip.start, self.clip.end],
            "category": self.label.category,
            "severity": round(self.severity, 6),
            "pair": list(self.pair),
            "flagged_frames": list(self.flagged_frames),
            "heatmap": rel(self.heatmap_path),
            "overlay": rel(self.overlay_path),
        }


def score_pair(
    seq: FrameSequence,
    t: int,
    flow_backend: Optional[FlowBackend] = None,
    metric: Optional[MetricBackend] = None,
) -> PairScore:
    f1, f2 = seq.frame(t), seq.frame(t + 1)
    w2 = warp(f2, estimate_flow(f1, f2, flow_backend))
    hm = normalize_map(perceptual_map(f1, w2, metric))
    return PairScore((t, t + 1), severity(hm), hm)


def best_pair(
    seq: FrameSequence,
    clip: Clip,
    flow_backend: Optional[FlowBackend] = None,
    metric: Optional[MetricBackend] = None,
) -> Optional[PairScore]:
    """Highest-severity consecutive pair in ``clip``; the earliest pair wins ties."""
    best: Optional[PairScore] = None
    for t, _ in clip.pairs():
        scored = score_pair(seq, t, flow_backend, metric)
        if best is None or scored.severity > best.severity:
            best = scored
    return best


def _clip_label(clip: Clip, labels: Mapping[int, ArtifactLabel]) -> Tuple[ArtifactLabel, List[int]]:
    flagged = sorted(t for t, lab in labels.items() if lab.flagged and clip.covers(t))
    if not flagged:
        return ArtifactLabel.NONE, []
    counts = Counter(labels[t] for t in flagged)
    top = max(counts.values())
    # most frequent category; ties resolved by first occurrence in time
    label = next(labels[t] for t in flagged if counts[labels[t]] == top)
    return label, flagged


def ensure_writable_dir(path: PathLike) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    probe = root / ".qrouter-write-test"
    probe.write_bytes(b"")
    probe.unlink()
    return root


def localize(
    seq: FrameSequence,
    clips: Sequence[Clip],
    labels: Mapping[int, ArtifactLabel],
    flow_backend: Optional[FlowBackend] = None,
    metric: Optional[MetricBackend] = None,
    alpha: float = ALPHA,
    out_dir: PathLike = ".",
    extra_summary: Optional[dict] = None,
) -> List[ClipResult]:
    """Evaluate every clip, write its representative heatmap/overlay and the JSON summary."""
    root = ensure_writable_dir(out_dir)
    results: List[ClipResult] = []
    skipped = []
    for clip in clips:
        label, flagged = _clip_label(clip, labels)
        best = best_pair(seq, clip, flow_backend, metric)
        if best is None:
            log.warning("skipping single-frame clip %s", clip)
            skipped.append({"clip": [clip.start, clip.end], "reason": "single-frame clip"})
            continue
        stem = f"clip{clip.start}-{clip.end}"
        heat_path = write_pgm(root / f"{stem}_heat.pgm", heatmap_to_gray(best.heatmap))
        overlay = render_overlay(seq.frame(best.pair[0]), best.heatmap, alpha)
        overlay_path = write_ppm(root / f"{stem}_overlay.ppm", overlay)
        results.append(ClipResult(clip, best.severity, best.pair, label, heat_path,
                                  overlay_path, flagged))

    summary = dict(extra_summary or {})
    summary["clips"] = [r.to_json(root) for r in results]
    summary["skipped"] = skipped
    (root / SUMMARY_NAME).write_text(json.dumps(summary, indent=2) + "\n")
    return results


# --------------------------------------------------------------------------
# End-to-end extraction + localization
# --------------------------------------------------------------------------


@dataclass
class LocalizationParams:
    weights: ScoringWeights = field(default_factory=ScoringWeights)
    tau_high: float = TAU_HIGH
    tau_low: float = TAU_LOW
    l_min: int = MIN_CLIP_LEN
    padding: int = PADDING
    budget: SelectionBudget = field(default_factory=SelectionBudget)
    theta_shot: float = THETA_SHOT
    alpha: float = ALPHA


@dataclass
class Extraction:
    features: np.ndarray
    probs: np.ndarray
    histograms: list
    clips: List[Clip]
    selected: List[int]


def probabilistic_extract(seq: FrameSequence, params: Optional[LocalizationParams] = None) -> Extraction:
    """Features -> probabilities -> hysteresis clips -> diversified frame subset."""
    params = params or LocalizationParams()
    hists = frame_histograms(seq)
    feats = extract_features(seq, hists)
    probs = frame_probabilities(feats, params.weights)
    clips = hysteresis_clips(probs, params.tau_high, params.tau_low, params.l_min, params.padding)
    selected = diversified_selection(probs, hists, feats, params.budget, params.theta_shot)
    return Extraction(feats, probs, hists, clips, selected)


@dataclass
class LocalizationRun:
    extraction: Extraction
    labels: Dict[int, ArtifactLabel]
    retained: List[Clip]
    results: List[ClipResult]
    out_dir: Path

    def summary(self) -> dict:
        return {
            "selected_frames": list(self.extraction.selected),
            "candidate_clips": [[c.start, c.end] for c in self.extraction.clips],
            "flagged_frames": sorted(t for t, lab in self.labels.items() if lab.flagged),
            "clips": [r.to_json(self.out_dir) for r in self.results],
        }


def run_localization(
    seq: FrameSequence,
    vlm_client,
    out_dir: PathLike,
    params: Optional[LocalizationParams] = None,
    flow_backend: Optional[FlowBackend] = None,
    metric: Optional[MetricBackend] = None,
) -> LocalizationRun:
    params = params or LocalizationParams()
    root = ensure_writable_dir(out_dir)
    ext = probabilistic_extract(seq, params)
    labels = vlm_filter(ext.selected, seq, vlm_client)
    retained = restrict_clips(ext.clips, labels)
    extra = {
        "frames": len(seq),
        "selected_frames": list(ext.selected),
        "candidate_clips": [[c.start, c.end] for c in ext.clips],
        "labels": {str(t): lab.value for t, lab in labels.items()},
    }
    results = localize(seq, retained, labels, flow_backend, metric, params.alpha, root, extra)
    return LocalizationRun(ext, labels, retained, results, root)
