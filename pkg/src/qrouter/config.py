"""Run configuration loaded from a JSON document.

Example::

    {
      "tier": 1,
      "mock": true,
      "seed": 7,
      "timeout": 30,
      "experts": {"COVER": {"endpoint": "http://host:8001/score", "mock_score": 62}},
      "vlm": {"endpoint": null, "mock_reply": "2"},
      "video_classifier": {"endpoint": null},
      "pool": {"cards": [...], "priors": {"ugc": {"COVER": 0.5, "UVQ": 0.5}}},
      "scoring_weights": {"w": {"diff_mean": 0.8, "grad_kurtosis": 0.6, "hist_dist_prev": 1.0}, "b": 0},
      "thresholds": {"tau_high": 0.65, "tau_low": 0.5, "l_min": 8, "padding": 4, "theta_shot": 0.5},
      "budgets": {"k_top": 8, "k_fps": 8},
      "alpha": 0.5,
      "video": {"video_type": "ugc", "text_prompt": null}
    }

Every key is optional.  Expert endpoints can be overridden with
``QROUTER_EXPERT_<NAME>_ENDPOINT``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

from .clients import DEFAULT_TIMEOUT
from .clips import MIN_CLIP_LEN, PADDING, TAU_HIGH, TAU_LOW
from .extractor import ScoringWeights
from .localization import ALPHA, LocalizationParams
from .routing import DEFAULT_CARDS, ExpertPool, ModelCard, RoutingError, parse_video_type
from .selection import K_FPS, K_TOP, THETA_SHOT, SelectionBudget


class ConfigError(ValueError):
    pass


@dataclass
class ExpertSettings:
    endpoint: Optional[str] = None
    mock_score: Optional[float] = None
    mock_factors: Optional[Dict[str, float]] = None


@dataclass
class RunConfig:
    tier: int = 1
    mock: bool = False
    seed: int = 0
    timeout: float = DEFAULT_TIMEOUT
    auth_token: Optional[str] = None
    experts: Dict[str, ExpertSettings] = field(default_factory=dict)
    vlm_endpoint: Optional[str] = None
    vlm_mock_reply: str = "2"
    classifier_endpoint: Optional[str] = None
    pool: ExpertPool = field(default_factory=ExpertPool)
    scoring_weights: ScoringWeights = field(default_factory=ScoringWeights)
    tau_high: float = TAU_HIGH
    tau_low: float = TAU_LOW
    l_min: int = MIN_CLIP_LEN
    padding: int = PADDING
    theta_shot: float = THETA_SHOT
    k_top: int = K_TOP
    k_fps: int = K_FPS
    alpha: float = ALPHA
    output_dir: Optional[str] = None
    video: Dict[str, object] = field(default_factory=dict)
    issue_threshold: float = 0.5

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.tier not in (0, 1, 2):
            raise ConfigError(f"tier must be 0, 1 or 2, got {self.tier!r}")
        if not 0.0 < self.tau_low <= self.tau_high < 1.0:
            raise ConfigError("thresholds need 0 < tau_low <= tau_high < 1")
        if self.l_min < 1 or self.padding < 0:
            raise ConfigError("l_min must be >= 1 and padding >= 0")
        if self.theta_shot <= 0:
            raise ConfigError("theta_shot must be > 0")
        if self.k_top < 0 or self.k_fps < 0:
            raise ConfigError("budgets must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def localization_params(self) -> LocalizationParams:
        return LocalizationParams(
            weights=self.scoring_weights,
            tau_high=self.tau_high,
            tau_low=self.tau_low,
            l_min=self.l_min,
            padding=self.padding,
            budget=SelectionBudget(self.k_top, self.k_fps),
            theta_shot=self.theta_shot,
            alpha=self.alpha,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        try:
            experts = {
                name: ExpertSettings(
                    endpoint=entry.get("endpoint"),
                    mock_score=entry.get("mock_score"),
                    mock_factors=entry.get("mock_factors"),
                )
                for name, entry in (data.get("experts") or {}).items()
            }
            pool_doc = data.get("pool") or {}
            cards = pool_doc.get("cards")
            cards = [ModelCard.from_dict(c) for c in cards] if cards else list(DEFAULT_CARDS)
            priors = pool_doc.get("priors")
            if priors is not None:
                priors = {parse_video_type(k): v for k, v in priors.items()}
            pool = ExpertPool(cards, priors)
            thresholds = data.get("thresholds") or {}
            budgets = data.get("budgets") or {}
            vlm = data.get("vlm") or {}
            video = dict(data.get("video") or {})
            if video.get("video_type") is not None:
                parse_video_type(video["video_type"])
            return cls(
                tier=int(data.get("tier", 1)),
                mock=bool(data.get("mock", False)),
                seed=int(data.get("seed", 0)),
                timeout=float(data.get("timeout", DEFAULT_TIMEOUT)),
                auth_token=data.get("auth_token"),
                experts=experts,
                vlm_endpoint=vlm.get("endpoint"),
                vlm_mock_reply=str(vlm.get("mock_reply", "2")),
                classifier_endpoint=(data.get("video_classifier") or {}).get("endpoint"),
                pool=pool,
                scoring_weights=ScoringWeights.from_dict(data.get("scoring_weights") or {}),
                tau_high=float(thresholds.get("tau_high", TAU_HIGH)),
                tau_low=float(thresholds.get("tau_low", TAU_LOW)),
                l_min=int(thresholds.get("l_min", MIN_CLIP_LEN)),
                padding=int(thresholds.get("padding", PADDING)),
                theta_shot=float(thresholds.get("theta_shot", THETA_SHOT)),
                k_top=int(budgets.get("k_top", K_TOP)),
                k_fps=int(budgets.get("k_fps", K_FPS)),
                alpha=float(data.get("alpha", ALPHA)),
                output_dir=data.get("output_dir"),
                video=video,
                issue_threshold=float(data.get("issue_threshold", 0.5)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, RoutingError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    return RunConfig.from_dict(data)
