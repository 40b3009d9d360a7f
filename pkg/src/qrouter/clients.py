"""HTTP+JSON clients for expert scorers and the VLM, plus deterministic mocks.

Wire contract
-------------
Expert scoring: ``POST <endpoint>`` with body
``{"video_ref": ..., "video_type_hint": ..., "text_prompt": ...}`` (optional
keys omitted), response ``{"score": <0..100>, "factors": {...}}``.

Frame classification: ``POST <endpoint>`` with body
``{"prompt": ..., "image": <base64 PPM>, "format": "ppm"}``, response
``{"response": "1" | "2" | "3" | "no"}``.

Video classification: ``POST <endpoint>`` with body ``{"prompt": ..., "meta": {...}}``,
response ``{"video_type": "<label>"}``.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import math
import os
import re
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from .media import encode_ppm

DEFAULT_TIMEOUT = 30.0

FRAME_FILTER_PROMPT = (
    "Classify this video frame. Reply 1 if it shows hallucinated or out-of-place "
    "content, 2 if it shows image artifacts such as compression blocks, blur, "
    "pixelation or unnatural texture, 3 if it shows AI-generation inconsistencies "
    "such as impossible lighting, shadows or anatomy. Reply no if none applies. "
    "Answer with exactly one of: 1, 2, 3, no."
)

VIDEO_TYPE_PROMPT = (
    "Classify the video as one of: UGC (user generated), AIGC (AI generated), "
    "CG (computer graphics / gaming), SHORT (short-form social). Answer with the label only."
)


class ErrorKind(str, enum.Enum):
    TIMEOUT = "timeout"
    PROTOCOL = "protocol"
    OUT_OF_RANGE = "out_of_range"
    TRANSPORT = "transport"


class ClientError(RuntimeError):
    def __init__(self, kind: ErrorKind, detail: str):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail


class ArtifactLabel(str, enum.Enum):
    HALLUCINATION = "1"
    IMAGE_ARTIFACT = "2"
    AI_INCONSISTENCY = "3"
    NONE = "no"

    @property
    def flagged(self) -> bool:
        return self is not ArtifactLabel.NONE

    @property
    def category(self) -> str:
        return {
            ArtifactLabel.HALLUCINATION: "hallucination",
            ArtifactLabel.IMAGE_ARTIFACT: "image_artifact",
            ArtifactLabel.AI_INCONSISTENCY: "ai_inconsistency",
            ArtifactLabel.NONE: "none",
        }[self]


def parse_label(text: str) -> ArtifactLabel:
    """Map a VLM reply onto a label; anything outside ``{1, 2, 3, no}`` is a protocol error."""
    if not isinstance(text, str):
        raise ClientError(ErrorKind.PROTOCOL, f"non-text classifier reply: {text!r}")
    token = text.strip().lower()
    for label in ArtifactLabel:
        if token == label.value:
            return label
    raise ClientError(ErrorKind.PROTOCOL, f"unexpected classifier reply: {text!r}")


@dataclass
class ExpertRequest:
    video_ref: str
    video_type_hint: Optional[str] = None
    text_prompt: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.video_ref:
            raise ValueError("video_ref must be non-empty")

    def to_json(self) -> dict:
        body = {"video_ref": self.video_ref}
        if self.video_type_hint is not None:
            body["video_type_hint"] = self.video_type_hint
        if self.text_prompt is not None:
            body["text_prompt"] = self.text_prompt
        return body


@dataclass
class ExpertResponse:
    score: float
    factors: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_json(cls, body: object) -> "ExpertResponse":
        if not isinstance(body, Mapping) or "score" not in body:
            raise ClientError(ErrorKind.PROTOCOL, f"response lacks a score: {body!r}")
        score = body["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise ClientError(ErrorKind.PROTOCOL, f"score is not a number: {score!r}")
        score = float(score)
        if not math.isfinite(score) or not 0.0 <= score <= 100.0:
            raise ClientError(ErrorKind.OUT_OF_RANGE, f"score {score} outside [0, 100]")
        factors = body.get("factors") or {}
        if not isinstance(factors, Mapping):
            raise ClientError(ErrorKind.PROTOCOL, "factors must be an object")
        try:
            factors = {str(k): float(v) for k, v in factors.items()}
        except (TypeError, ValueError) as exc:
            raise ClientError(ErrorKind.PROTOCOL, f"non-numeric factor: {exc}") from exc
        return cls(score=score, factors=factors)


def post_json(
    endpoint: str,
    payload: dict,
    timeout: float = DEFAULT_TIMEOUT,
    token: Optional[str] = None,
) -> object:
    """Single-attempt JSON POST; failures surface as :class:`ClientError`."""
    data = json.dumps(payload).encode("utf-8")
    headers = {"Content-Type": "application/json", "Accept": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    req = urllib.request.Request(endpoint, data=data, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        raise ClientError(ErrorKind.TRANSPORT, f"HTTP {exc.code} from {endpoint}") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise ClientError(ErrorKind.TIMEOUT, f"{endpoint} timed out") from exc
        raise ClientError(ErrorKind.TRANSPORT, f"{endpoint}: {exc.reason}") from exc
    except (socket.timeout, TimeoutError) as exc:
        raise ClientError(ErrorKind.TIMEOUT, f"{endpoint} timed out") from exc
    except (OSError, ValueError) as exc:
        raise ClientError(ErrorKind.TRANSPORT, f"{endpoint}: {exc}") from exc
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ClientError(ErrorKind.PROTOCOL, f"malformed JSON body from {endpoint}") from exc


def score_video(
    endpoint: str,
    request: ExpertRequest,
    timeout: float = DEFAULT_TIMEOUT,
    token: Optional[str] = None,
) -> ExpertResponse:
    return ExpertResponse.from_json(post_json(endpoint, request.to_json(), timeout, token))


def classify_frame(
    endpoint: str,
    frame: np.ndarray,
    timeout: float = DEFAULT_TIMEOUT,
    token: Optional[str] = None,
) -> ArtifactLabel:
    payload = {
        "prompt": FRAME_FILTER_PROMPT,
        "image": base64.b64encode(encode_ppm(frame)).decode("ascii"),
        "format": "ppm",
    }
    body = post_json(endpoint, payload, timeout, token)
    if not isinstance(body, Mapping) or "response" not in body:
        raise ClientError(ErrorKind.PROTOCOL, f"classifier body lacks 'response': {body!r}")
    return parse_label(body["response"])


def endpoint_env_var(name: str) -> str:
    return "QROUTER_EXPERT_" + re.sub(r"[^A-Z0-9]", "_", name.upper()) + "_ENDPOINT"


def resolve_endpoint(name: str, configured: Optional[str]) -> Optional[str]:
    """Environment override first, then the configured endpoint."""
    return os.environ.get(endpoint_env_var(name)) or configured


# --------------------------------------------------------------------------
# Client objects used by the pipeline
# --------------------------------------------------------------------------


class HttpExpert:
    def __init__(self, name: str, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 token: Optional[str] = None):
        self.name = name
        self.endpoint = endpoint
        self.timeout = timeout
        self.token = token

    def score(self, request: ExpertRequest) -> ExpertResponse:
        return score_video(self.endpoint, request, self.timeout, self.token)


def stable_unit(*parts: object) -> float:
    """Platform-independent hash of ``parts`` mapped uniformly into ``[0, 1)``."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


class MockExpert:
    """Deterministic stand-in for an expert service.

    With ``fixed_score`` set every video gets that score; otherwise the score
    is a stable hash of ``(name, video_ref, seed)`` scaled to ``[0, 100]``.
    Unless ``factors`` is given, each of ``factor_names`` gets a hashed value
    in ``[0, 1)``.
    """

    def __init__(self, name: str, seed: int = 0, fixed_score: Optional[float] = None,
                 factors: Optional[Dict[str, float]] = None, factor_names: Sequence[str] = ()):
        self.name = name
        self.seed = seed
        self.fixed_score = fixed_score
        self.factors = dict(factors) if factors is not None else None
        self.factor_names = tuple(factor_names)

    def score(self, request: ExpertRequest) -> ExpertResponse:
        ref = request.video_ref
        if self.fixed_score is not None:
            value = float(self.fixed_score)
        else:
            value = round(100.0 * stable_unit(self.name, ref, self.seed), 6)
        factors = self.factors
        if factors is None:
            factors = {f: round(stable_unit(self.name, ref, self.seed, f), 4) for f in self.factor_names}
        return ExpertResponse.from_json({"score": value, "factors": factors})


def mock_expert(name: str, seed: int = 0) -> MockExpert:
    return MockExpert(name, seed)


class HttpFrameClassifier:
    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 token: Optional[str] = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.token = token

    def classify(self, frame: np.ndarray) -> ArtifactLabel:
        return classify_frame(self.endpoint, frame, self.timeout, self.token)


class MockFrameClassifier:
    """Replies with a fixed text (default ``"2"``) or ``reply(frame)`` when callable."""

    def __init__(self, reply: Union[str, Callable[[np.ndarray], str]] = "2"):
        self.reply = reply

    def classify(self, frame: np.ndarray) -> ArtifactLabel:
        text = self.reply(frame) if callable(self.reply) else self.reply
        return parse_label(text)


class HttpVideoClassifier:
    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 token: Optional[str] = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.token = token

    def classify(self, meta: Mapping) -> str:
        body = post_json(self.endpoint, {"prompt": VIDEO_TYPE_PROMPT, "meta": dict(meta)},
                         self.timeout, self.token)
        if not isinstance(body, Mapping) or not isinstance(body.get("video_type"), str):
            raise ClientError(ErrorKind.PROTOCOL, f"classifier body lacks 'video_type': {body!r}")
        return body["video_type"]


class MetadataVideoClassifier:
    """Offline classifier: echoes the ``video_type`` metadata field."""

    def __init__(self, default: str = "ugc"):
        self.default = default

    def classify(self, meta: Mapping) -> str:
        return str(meta.get("video_type") or self.default)
