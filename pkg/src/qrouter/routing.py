"""Expert pool, model cards, baseline priors and routing-weight computation."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence

import numpy as np

TRIM_FRACTION = 0.2
AGREEMENT_SCALE = 25.0
DEFAULT_CONFIDENCE_PRIOR = 0.5

SPECIALTY_COEF = 0.5
AGREEMENT_COEF = 0.3
CONFIDENCE_COEF = 0.2
OOB_COEF = 0.3


class RoutingError(ValueError):
    pass


class VideoType(str, enum.Enum):
    UGC = "ugc"
    SHORT_FORM = "short_form"
    GAMING = "gaming"
    AI_GENERATED = "aigc"


_TYPE_ALIASES = {
    "ugc": VideoType.UGC,
    "usergenerated": VideoType.UGC,
    "usergeneratedcontent": VideoType.UGC,
    "shortform": VideoType.SHORT_FORM,
    "short": VideoType.SHORT_FORM,
    "social": VideoType.SHORT_FORM,
    "shortformsocial": VideoType.SHORT_FORM,
    "gaming": VideoType.GAMING,
    "game": VideoType.GAMING,
    "cg": VideoType.GAMING,
    "computergraphics": VideoType.GAMING,
    "aigc": VideoType.AI_GENERATED,
    "ai": VideoType.AI_GENERATED,
    "aigenerated": VideoType.AI_GENERATED,
    "aigeneratedcontent": VideoType.AI_GENERATED,
}


def parse_video_type(text: str) -> VideoType:
    """Map a free-form type label (``"UGC"``, ``"AI-generated"``, ``"CG"``...) to a VideoType."""
    key = re.sub(r"[^a-z]", "", str(text).lower())
    try:
        return _TYPE_ALIASES[key]
    except KeyError:
        raise RoutingError(f"unmappable video type {text!r}") from None


class MatchGrade(float, enum.Enum):
    FULL = 1.0
    PARTIAL = 0.5
    NONE = 0.0

    @classmethod
    def parse(cls, text: str) -> "MatchGrade":
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise RoutingError(f"unknown match grade {text!r}") from None


class ScoringRole(str, enum.Enum):
    SCORER = "scorer"
    EXPLANATION_ONLY = "explanation"


@dataclass(frozen=True)
class ModelCard:
    name: str
    specialties: Mapping[VideoType, MatchGrade] = field(default_factory=dict)
    confidence_prior: float = DEFAULT_CONFIDENCE_PRIOR
    role: ScoringRole = ScoringRole.SCORER
    insensitive_to: FrozenSet[str] = frozenset()
    notes: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence_prior <= 1.0:
            raise RoutingError(f"{self.name}: confidence_prior must lie in [0, 1]")

    def match(self, vtype: VideoType) -> MatchGrade:
        return self.specialties.get(vtype, MatchGrade.NONE)

    @property
    def scores(self) -> bool:
        return self.role is ScoringRole.SCORER

    def oob(self, vtype: VideoType, issues: Iterable[str] = ()) -> int:
        """1 when the card does not cover ``vtype`` or is blind to a detected issue."""
        if self.match(vtype) is MatchGrade.NONE:
            return 1
        return int(bool(self.insensitive_to.intersection(issues)))

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelCard":
        role = data.get("role", "scorer")
        return cls(
            name=data["name"],
            specialties={parse_video_type(k): MatchGrade.parse(v)
                         for k, v in (data.get("specialties") or {}).items()},
            confidence_prior=float(data.get("confidence_prior", DEFAULT_CONFIDENCE_PRIOR)),
            role=ScoringRole.EXPLANATION_ONLY if str(role).startswith("expl") else ScoringRole.SCORER,
            insensitive_to=frozenset(data.get("insensitive_to", ())),
            notes=str(data.get("notes", "")),
        )


F, P, N = MatchGrade.FULL, MatchGrade.PARTIAL, MatchGrade.NONE
U, S, G, A = VideoType.UGC, VideoType.SHORT_FORM, VideoType.GAMING, VideoType.AI_GENERATED

DEFAULT_CARDS = (
    ModelCard("COVER", {U: F, S: F, G: F, A: P},
              notes="technical/aesthetic/semantic branches; compression and composition aware"),
    ModelCard("DOVER++", {U: F, S: P, G: P, A: N},
              notes="overlaps COVER; consistency reference"),
    ModelCard("UVQ", {U: F, S: F, G: P, A: P},
              notes="large-scale UGC baseline; robust when the domain is unclear"),
    ModelCard("MaxVQA", {U: P, S: P, G: P, A: P}, role=ScoringRole.EXPLANATION_ONLY,
              notes="factor-level explanations and weight hints only"),
    ModelCard("ModularBVQA", {U: P, S: P, G: P, A: N},
              insensitive_to=frozenset({"blur", "noise", "shake"}),
              notes="lightweight fallback; weak on capture distortions"),
    ModelCard("T2VQA", {A: F},
              notes="text-video alignment for generated content"),
)
del F, P, N, U, S, G, A

# Baseline priors per video type, keyed by the names used in the prior table.
DEFAULT_PRIORS: Dict[VideoType, Dict[str, float]] = {
    VideoType.UGC: {"UVQ": 0.25, "COVER": 0.25, "ModularBVQA": 0.15, "RQ-VQA": 0.10, "MaxVQA": 0.15},
    VideoType.SHORT_FORM: {"RQ-VQA": 0.30, "COVER": 0.30, "UVQ": 0.20, "Modular": 0.10, "MaxVQA": 0.10},
    VideoType.GAMING: {"COVER-Technical": 0.35, "UVQ": 0.25, "Modular": 0.20, "MaxVQA": 0.10, "RQ-VQA": 0.05},
    VideoType.AI_GENERATED: {"T2VQA": 0.35, "COVER": 0.20, "UVQ": 0.15, "MaxVQA": 0.15,
                             "Modular": 0.10, "RQ-VQA": 0.05},
}

PRIOR_ALIASES = {"Modular": "ModularBVQA", "COVER-Technical": "COVER"}


class ExpertPool:
    """Registered model cards (in registration order) and their type priors."""

    def __init__(self, cards: Iterable[ModelCard] = DEFAULT_CARDS,
                 priors: Optional[Mapping[VideoType, Mapping[str, float]]] = None):
        self.cards: Dict[str, ModelCard] = {}
        for card in cards:
            if card.name in self.cards:
                raise RoutingError(f"duplicate expert name {card.name!r}")
            self.cards[card.name] = card
        if not self.cards:
            raise RoutingError("expert pool is empty")
        raw = DEFAULT_PRIORS if priors is None else priors
        self.priors: Dict[VideoType, Dict[str, float]] = {}
        for vtype, row in raw.items():
            merged: Dict[str, float] = {}
            for name, w in row.items():
                if w < 0:
                    raise RoutingError(f"negative prior for {name!r}")
                canonical = PRIOR_ALIASES.get(name, name)
                merged[canonical] = merged.get(canonical, 0.0) + float(w)
            self.priors[VideoType(vtype)] = merged

    @property
    def names(self) -> List[str]:
        return list(self.cards)

    def scorers(self) -> List[str]:
        return [n for n, c in self.cards.items() if c.scores]

    def subset(self, names: Sequence[str]) -> "ExpertPool":
        return ExpertPool([self.cards[n] for n in names], self.priors)


def baseline_weights(vtype: VideoType, pool: ExpertPool) -> Dict[str, float]:
    """Type priors restricted to registered scorers and renormalized to sum 1.

    Unregistered or explanation-only experts are dropped before
    renormalization.  Returned in registration order, zeros included.
    """
    row = pool.priors.get(vtype, {})
    base = {n: row.get(n, 0.0) for n in pool.scorers()}
    total = math.fsum(base.values())
    if total <= 0.0:
        raise RoutingError(f"no scoring expert has a prior for {vtype.value}")
    return {n: w / total for n, w in base.items()}


def trimmed_mean(scores: Sequence[float], trim_fraction: float = TRIM_FRACTION) -> float:
    """Mean after dropping ``floor(trim_fraction * n)`` values from each end."""
    if len(scores) == 0:
        raise ValueError("trimmed_mean of an empty list")
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim_fraction must lie in [0, 0.5)")
    xs = sorted(float(s) for s in scores)
    k = int(math.floor(trim_fraction * len(xs)))
    kept = xs[k : len(xs) - k]
    return math.fsum(kept) / len(kept)


def agreement_boost(score: float, center: float, scale: float = AGREEMENT_SCALE) -> float:
    return max(0.0, 1.0 - abs(score - center) / scale)


def combine_weights(base, sm, ab, cp, oob) -> np.ndarray:
    """``base * (1 + 0.5 sm + 0.3 ab + 0.2 cp - 0.3 oob)`` normalized to sum 1."""
    base = np.asarray(base, dtype=np.float64)
    mult = (1.0 + SPECIALTY_COEF * np.asarray(sm, dtype=np.float64)
            + AGREEMENT_COEF * np.asarray(ab, dtype=np.float64)
            + CONFIDENCE_COEF * np.asarray(cp, dtype=np.float64)
            - OOB_COEF * np.asarray(oob, dtype=np.float64))
    raw = base * mult
    total = raw.sum()
    if not total > 0.0:
        raise RoutingError("all adjusted weights are zero")
    return raw / total


def adjust_weights(
    base: Mapping[str, float],
    scores: Mapping[str, float],
    cards: Mapping[str, ModelCard],
    vtype: VideoType,
    detected_issues: Iterable[str] = (),
    trim_fraction: float = TRIM_FRACTION,
) -> Dict[str, float]:
    """Score-aware weight adjustment over the experts in ``base``."""
    issues = set(detected_issues)
    names = list(base)
    weighted = [n for n in names if base[n] > 0]
    missing = [n for n in weighted if n not in scores]
    if missing:
        raise RoutingError(f"missing score for weighted expert(s): {', '.join(missing)}")
    center = trimmed_mean([scores[n] for n in weighted], trim_fraction) if weighted else 0.0
    terms = adjustment_terms(names, scores, cards, vtype, issues, center)
    w = combine_weights([base[n] for n in names], *terms)
    return dict(zip(names, w.tolist()))


def adjustment_terms(names, scores, cards, vtype, issues, center):
    sm = [cards[n].match(vtype).value for n in names]
    ab = [agreement_boost(scores[n], center) if n in scores else 0.0 for n in names]
    cp = [cards[n].confidence_prior for n in names]
    oob = [cards[n].oob(vtype, issues) for n in names]
    return sm, ab, cp, oob


@dataclass
class RoutingPlan:
    tier: int
    chosen_experts: List[str]
    weights: Dict[str, float]
    reasons: Dict[str, str]
    video_type: VideoType = VideoType.UGC

    def __post_init__(self) -> None:
        if self.tier not in (0, 1, 2):
            raise RoutingError(f"tier must be 0, 1 or 2, got {self.tier}")
        if not self.chosen_experts:
            raise RoutingError("a routing plan needs at least one expert")
        if self.tier == 0 and len(self.chosen_experts) != 1:
            raise RoutingError("tier-0 plans route to exactly one expert")
        if abs(math.fsum(self.weights[n] for n in self.chosen_experts) - 1.0) > 1e-9:
            raise RoutingError("plan weights must sum to 1")


def tier0_route(base: Mapping[str, float], cards: Mapping[str, ModelCard], vtype: VideoType) -> RoutingPlan:
    """Pick the single expert maximizing ``base * (1 + 0.5 sm + 0.2 cp)``.

    Agreement and out-of-band terms need scores, which tier 0 never collects.
    Ties keep the earlier-registered expert.
    """
    if not base:
        raise RoutingError("expert pool is empty")
    best_name, best_value = None, -math.inf
    for name, b in base.items():
        card = cards[name]
        value = b * (1.0 + SPECIALTY_COEF * card.match(vtype).value + CONFIDENCE_COEF * card.confidence_prior)
        if value > best_value:
            best_name, best_value = name, value
    card = cards[best_name]
    reason = (f"single expert for {vtype.value}: prior {base[best_name]:.3f}, "
              f"specialty {card.match(vtype).name.lower()}")
    return RoutingPlan(0, [best_name], {best_name: 1.0}, {best_name: reason}, vtype)


def tier1_route(
    base: Mapping[str, float],
    scores: Mapping[str, float],
    cards: Mapping[str, ModelCard],
    vtype: VideoType,
    detected_issues: Iterable[str] = (),
    tier: int = 1,
) -> RoutingPlan:
    """Multi-expert plan over every expert with a positive prior."""
    issues = set(detected_issues)
    chosen = [n for n, b in base.items() if b > 0]
    sub = {n: base[n] for n in chosen}
    weights = adjust_weights(sub, scores, cards, vtype, issues)
    center = trimmed_mean([scores[n] for n in chosen])
    reasons = {}
    for n in chosen:
        card = cards[n]
        text = (f"prior {base[n]:.3f}, specialty {card.match(vtype).name.lower()}, "
                f"agreement {agreement_boost(scores[n], center):.2f}, "
                f"confidence {card.confidence_prior:.2f}")
        if card.oob(vtype, issues):
            text += ", out-of-band penalty"
        reasons[n] = text
    return RoutingPlan(tier, chosen, weights, reasons, vtype)


def classify_video(meta: Mapping, client) -> VideoType:
    """Ask ``client.classify(meta)`` for a type label and map it onto the prior table."""
    return parse_video_type(client.classify(meta))
