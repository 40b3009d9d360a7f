"""Score fusion and quality-report assembly."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import jsonschema

from .routing import ModelCard, RoutingPlan

RANGE_GATE = 20.0
SUMMARY_MAX = 120
DISPERSION_SCALE = 50.0
_HALF_TOL = 1e-12


class FusionMethod(str, enum.Enum):
    WEIGHTED_MEAN = "weighted_mean"
    WEIGHTED_MEDIAN = "weighted_median"
    SINGLE = "single-expert"


def _check(scores: Sequence[float], weights: Sequence[float]) -> None:
    if len(scores) != len(weights):
        raise ValueError(f"{len(scores)} scores but {len(weights)} weights")
    if not scores:
        raise ValueError("nothing to fuse")


def choose_method(scores: Sequence[float]) -> FusionMethod:
    """Weighted median when the score range strictly exceeds 20 points."""
    if not scores:
        raise ValueError("choose_method needs at least one score")
    spread = max(scores) - min(scores)
    return FusionMethod.WEIGHTED_MEDIAN if spread > RANGE_GATE else FusionMethod.WEIGHTED_MEAN


def weighted_mean(scores: Sequence[float], weights: Sequence[float]) -> float:
    _check(scores, weights)
    value = math.fsum(w * s for s, w in zip(scores, weights))
    # keep the convex combination inside the input range despite rounding
    return min(max(value, min(scores)), max(scores))


def weighted_median(scores: Sequence[float], weights: Sequence[float]) -> float:
    """First score (ascending, stable) at which cumulative weight reaches 0.5."""
    _check(scores, weights)
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    total = math.fsum(weights)
    acc = []
    for i in order:
        acc.append(weights[i])
        if math.fsum(acc) >= 0.5 * total - _HALF_TOL:
            return float(scores[i])
    return float(scores[order[-1]])


def fuse(scores: Sequence[float], weights: Sequence[float]) -> tuple:
    method = choose_method(scores)
    if method is FusionMethod.WEIGHTED_MEDIAN:
        return weighted_median(scores, weights), method
    return weighted_mean(scores, weights), method


def final_score(fused: float) -> int:
    """Round half away from zero, then clamp to ``[0, 100]``."""
    if not math.isfinite(fused):
        raise ValueError("fused score must be finite")
    rounded = math.floor(abs(fused) + 0.5)
    rounded = int(math.copysign(rounded, fused))
    return min(100, max(0, rounded))


def confidence(scores: Sequence[float], weights: Sequence[float]) -> float:
    """``1 - min(1, weighted_sd / 50)``."""
    _check(scores, weights)
    total = math.fsum(weights)
    mu = math.fsum(w * s for s, w in zip(scores, weights)) / total
    var = math.fsum(w * (s - mu) ** 2 for s, w in zip(scores, weights)) / total
    return max(0.0, min(1.0, 1.0 - min(1.0, math.sqrt(var) / DISPERSION_SCALE)))


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------

REPORT_FIELDS = ("final_score", "summary_en", "chosen_experts", "per_model",
                 "evidence", "diagnostics", "confidence")

REPORT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": list(REPORT_FIELDS),
    "properties": {
        "final_score": {"type": "integer", "minimum": 0, "maximum": 100},
        "summary_en": {"type": "string", "maxLength": SUMMARY_MAX},
        "chosen_experts": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "per_model": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "score", "weight", "specialty_match", "notes"],
                "properties": {
                    "name": {"type": "string"},
                    "score": {"type": "number", "minimum": 0, "maximum": 100},
                    "weight": {"type": "number", "minimum": 0, "maximum": 1},
                    "specialty_match": {"enum": ["full", "partial", "none"]},
                    "notes": {"type": "string"},
                },
            },
        },
        "evidence": {
            "type": "object",
            "additionalProperties": False,
            "required": ["keyframes", "detected_issues", "factors", "localization"],
            "properties": {
                "keyframes": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "detected_issues": {"type": "array", "items": {"type": "string"}},
                "factors": {"type": "object"},
                "localization": {"type": ["object", "null"]},
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "required": ["tier", "video_type", "score_range", "fusion_method",
                         "routing_reasons", "next_actions"],
            "properties": {
                "tier": {"enum": [0, 1, 2]},
                "video_type": {"type": "string"},
                "score_range": {"type": "number", "minimum": 0},
                "fusion_method": {"enum": [m.value for m in FusionMethod]},
                "routing_reasons": {"type": "object"},
                "next_actions": {"type": "array", "items": {"type": "string"}},
            },
        },
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
    },
}


class ReportError(RuntimeError):
    """An assembled report failed schema validation."""


@dataclass
class QualityReport:
    final_score: int
    summary_en: str
    chosen_experts: List[str]
    per_model: List[dict]
    evidence: dict
    diagnostics: dict
    confidence: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QualityReport":
        data = json.loads(text)
        validate_report(data)
        return cls(**data)


def validate_report(data: Mapping) -> None:
    try:
        jsonschema.validate(data, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ReportError(f"report schema violation: {exc.message}") from exc


def shorten(text: str, limit: int = SUMMARY_MAX) -> str:
    """Truncate at a word boundary with a trailing ``...`` when over ``limit``."""
    if len(text) <= limit:
        return text
    head = text[: limit - 3]
    if " " in head:
        head = head[: head.rfind(" ")]
    return head.rstrip(" ,;:") + "..."


def _method_label(method: FusionMethod) -> str:
    return {FusionMethod.WEIGHTED_MEAN: "weighted mean",
            FusionMethod.WEIGHTED_MEDIAN: "weighted median",
            FusionMethod.SINGLE: "single expert"}[method]


def _next_actions(plan: RoutingPlan, spread: float, issues: Sequence[str],
                  localization: Optional[dict]) -> List[str]:
    actions = []
    if spread > RANGE_GATE:
        actions.append("review expert disagreement before trusting the score")
    if plan.tier < 2 and issues:
        actions.append("run tier-2 localization to locate the detected issues")
    if localization and localization.get("clips"):
        spans = ", ".join(f"{c['clip'][0]}-{c['clip'][1]}" for c in localization["clips"])
        actions.append(f"inspect heatmaps for frames {spans}")
    if not actions:
        actions.append("none")
    return actions


def build_report(
    plan: RoutingPlan,
    scores: Mapping[str, float],
    fused: float,
    method: FusionMethod,
    localization: Optional[dict] = None,
    *,
    cards: Mapping[str, ModelCard],
    factors: Optional[Mapping[str, Mapping[str, float]]] = None,
    detected_issues: Sequence[str] = (),
    keyframes: Sequence[int] = (),
) -> QualityReport:
    """Assemble and validate the seven-field report.

    ``scores`` may include experts outside the plan (e.g. explanation-only
    ones); they are listed in ``per_model`` with weight 0.
    """
    missing = [n for n in plan.chosen_experts if n not in scores]
    if missing:
        raise ReportError(f"no score for chosen expert(s): {', '.join(missing)}")
    vtype = plan.video_type
    rows = []
    for name, score in scores.items():
        card = cards.get(name)
        chosen = name in plan.weights
        if chosen:
            note = plan.reasons.get(name, "")
        elif card is not None and not card.scores:
            note = "explanation only, not fused"
        else:
            note = "not routed for this video type"
        rows.append({
            "name": name,
            "score": round(float(score), 4),
            "weight": round(float(plan.weights.get(name, 0.0)), 6),
            "specialty_match": card.match(vtype).name.lower() if card else "none",
            "notes": note,
        })

    chosen_scores = [float(scores[n]) for n in plan.chosen_experts]
    chosen_weights = [plan.weights[n] for n in plan.chosen_experts]
    spread = max(chosen_scores) - min(chosen_scores)
    score = final_score(fused)
    issues = list(detected_issues)
    top_issue = issues[0] if issues else "none detected"
    n = len(plan.chosen_experts)
    summary = (f"Quality {score}/100 by {_method_label(method)} over {n} expert"
               f"{'s' if n != 1 else ''} ({vtype.value}); main issue: {top_issue}.")
    if localization and localization.get("clips"):
        summary += f" {len(localization['clips'])} artifact clip(s) localized."

    report = QualityReport(
        final_score=score,
        summary_en=shorten(summary),
        chosen_experts=list(plan.chosen_experts),
        per_model=rows,
        evidence={
            "keyframes": sorted(int(k) for k in keyframes),
            "detected_issues": issues,
            "factors": {k: dict(v) for k, v in (factors or {}).items()},
            "localization": localization,
        },
        diagnostics={
            "tier": plan.tier,
            "video_type": vtype.value,
            "score_range": round(spread, 4),
            "fusion_method": method.value,
            "routing_reasons": dict(plan.reasons),
            "next_actions": _next_actions(plan, spread, issues, localization),
        },
        confidence=round(confidence(chosen_scores, chosen_weights), 6),
    )
    validate_report(report.to_dict())
    return report
