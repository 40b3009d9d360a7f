"""Tier 0/1/2 scoring pipeline wiring clients, routing, fusion and localization."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

from .clients import (
    ClientError,
    ExpertRequest,
    ExpertResponse,
    HttpExpert,
    HttpFrameClassifier,
    HttpVideoClassifier,
    MetadataVideoClassifier,
    MockExpert,
    MockFrameClassifier,
    resolve_endpoint,
)
from .config import ExpertSettings, RunConfig
from .fusion import FusionMethod, QualityReport, build_report, fuse
from .localization import run_localization
from .media import FrameSequence, load_frame_dir
from .routing import ExpertPool, RoutingError, RoutingPlan, baseline_weights, classify_video, tier0_route, tier1_route

log = logging.getLogger(__name__)

REPORT_NAME = "report.json"
META_NAME = "meta.json"
MOCK_FACTORS = ("banding", "blur", "freeze", "noise")


class PipelineError(RuntimeError):
    pass


def load_meta(video_dir: Path, config: RunConfig) -> dict:
    """Config ``video`` section overlaid by ``<video_dir>/meta.json`` when present."""
    meta = dict(config.video)
    path = Path(video_dir) / META_NAME
    if path.is_file():
        meta.update(json.loads(path.read_text()))
    return meta


def make_expert(name: str, config: RunConfig, pool: ExpertPool):
    settings = config.experts.get(name) or ExpertSettings()
    if config.mock:
        factor_names = () if pool.cards[name].scores else MOCK_FACTORS
        return MockExpert(name, config.seed, settings.mock_score, settings.mock_factors, factor_names)
    endpoint = resolve_endpoint(name, settings.endpoint)
    if not endpoint:
        return None
    return HttpExpert(name, endpoint, config.timeout, config.auth_token)


def collect_scores(experts: Dict[str, object], request: ExpertRequest) -> Dict[str, ExpertResponse]:
    """Fan out to every expert concurrently; failed experts are logged and dropped."""
    if not experts:
        return {}
    names = list(experts)
    with ThreadPoolExecutor(max_workers=len(names)) as pool:
        futures = {n: pool.submit(experts[n].score, request) for n in names}
    out: Dict[str, ExpertResponse] = {}
    for n in names:
        try:
            out[n] = futures[n].result()
        except ClientError as exc:
            log.warning("expert %s failed: %s", n, exc)
    return out


def detected_issues(responses: Dict[str, ExpertResponse], threshold: float) -> List[str]:
    """Factor names at or above ``threshold`` in any response, strongest first."""
    best: Dict[str, float] = {}
    for resp in responses.values():
        for k, v in resp.factors.items():
            if v >= threshold:
                best[k] = max(v, best.get(k, v))
    return sorted(best, key=lambda k: (-best[k], k))


def _video_classifier(config: RunConfig):
    if config.mock or not config.classifier_endpoint:
        return MetadataVideoClassifier()
    return HttpVideoClassifier(config.classifier_endpoint, config.timeout, config.auth_token)


def frame_classifier(config: RunConfig):
    if config.mock or not config.vlm_endpoint:
        if not config.mock:
            raise PipelineError("no VLM endpoint configured and mock mode is off")
        return MockFrameClassifier(config.vlm_mock_reply)
    return HttpFrameClassifier(config.vlm_endpoint, config.timeout, config.auth_token)


@dataclass
class ScoreRun:
    report: QualityReport
    report_path: Path


def score_video(video_dir, config: RunConfig, out_dir) -> ScoreRun:
    """Run the configured tier on one frame directory and write ``report.json``."""
    video_dir = Path(video_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seq: FrameSequence = load_frame_dir(video_dir)
    meta = load_meta(video_dir, config)

    experts = {n: e for n in config.pool.names
               if (e := make_expert(n, config, config.pool)) is not None}
    if not experts:
        raise PipelineError("no expert has an endpoint configured")
    pool = config.pool.subset(list(experts))
    cards = pool.cards
    vtype = classify_video(meta, _video_classifier(config))
    request = ExpertRequest(str(video_dir), vtype.value, meta.get("text_prompt"))

    if config.tier == 0:
        plan, responses = _tier0(pool, experts, vtype, request)
        name = plan.chosen_experts[0]
        fused, method = responses[name].score, FusionMethod.SINGLE
        issues = detected_issues(responses, config.issue_threshold)
        localization, keyframes = None, []
    else:
        responses = collect_scores(experts, request)
        scorers = [n for n in responses if cards[n].scores]
        if not scorers:
            raise PipelineError("all experts failed; no fusable score")
        try:
            base = baseline_weights(vtype, pool.subset([n for n in pool.names if n in responses]))
        except RoutingError as exc:
            raise PipelineError(str(exc)) from exc
        issues = detected_issues(responses, config.issue_threshold)
        scores = {n: responses[n].score for n in responses}
        plan = tier1_route(base, scores, cards, vtype, issues, tier=config.tier)
        chosen = [scores[n] for n in plan.chosen_experts]
        fused, method = fuse(chosen, [plan.weights[n] for n in plan.chosen_experts])
        localization, keyframes = None, []
        if config.tier == 2:
            run = run_localization(seq, frame_classifier(config), out / "localization",
                                   config.localization_params())
            localization = run.summary()
            keyframes = run.extraction.selected
            for clip in localization["clips"]:
                if clip["category"] not in issues:
                    issues.append(clip["category"])

    scores = {n: r.score for n, r in responses.items()}
    factors = {n: r.factors for n, r in responses.items() if r.factors}
    report = build_report(plan, scores, fused, method, localization, cards=cards,
                          factors=factors, detected_issues=issues, keyframes=keyframes)
    path = out / REPORT_NAME
    path.write_text(report.to_json())
    return ScoreRun(report, path)


def _tier0(pool: ExpertPool, experts, vtype, request) -> Tuple[RoutingPlan, Dict[str, ExpertResponse]]:
    """Query the tier-0 pick; on failure fall back to the next-ranked expert."""
    remaining = list(pool.names)
    while remaining:
        sub = pool.subset(remaining)
        try:
            base = baseline_weights(vtype, sub)
        except RoutingError as exc:
            raise PipelineError(f"all experts failed; {exc}") from exc
        plan = tier0_route(base, sub.cards, vtype)
        name = plan.chosen_experts[0]
        try:
            return plan, {name: experts[name].score(request)}
        except ClientError as exc:
            log.warning("tier-0 expert %s failed: %s", name, exc)
            remaining.remove(name)
    raise PipelineError("all experts failed; no fusable score")
