"""Pluggable annotator backends: mock, scripted fixture, and remote HTTP.

The remote contract is JSON over HTTP: request
``{item_id, prompt, media_refs, prior_records?}`` and response
``{emotions: [...], personality, confidence, rationale}``. High-level
annotators receive the prior (low-level) records in their payload.
Responses are validated against the fixed label spaces and rejected
otherwise; media is passed by reference, never embedded.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from ..labels import BIG_FIVE, EMOTIONS
from .records import AnnotationRecord, RecordError

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 3
DEFAULT_CONCURRENCY = 4


class AnnotatorUnavailableError(RuntimeError):
    """The remote endpoint failed after all retry attempts."""


class MalformedResponseError(ValueError):
    """The remote endpoint returned a payload outside the contract."""

    def __init__(self, message: str, raw_body: str):
        super().__init__(f"{message}; raw body: {raw_body!r}")
        self.raw_body = raw_body


@dataclass
class AnnotatorSpec:
    """Configuration for one annotator backend."""

    id: str
    kind: str  # mock | scripted | remote
    level: str = "low"  # low | high
    prompt_id: str = "default"
    prompt: str = ""
    endpoint_env: str | None = None  # env var holding the endpoint URL
    api_key_env: str | None = None
    consumes: tuple[str, ...] = ("text", "video", "audio")
    seed: int = 0
    timeout: float = DEFAULT_TIMEOUT
    retries: int = DEFAULT_RETRIES

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "scripted", "remote"):
            raise ValueError(f"unknown annotator kind {self.kind!r}")
        if self.level not in ("low", "high"):
            raise ValueError(f"unknown annotator level {self.level!r}")
        if self.kind == "remote" and not self.endpoint_env:
            raise ValueError(f"remote annotator {self.id} needs endpoint_env")
        self.consumes = tuple(self.consumes)

    def endpoint(self) -> str:
        url = os.environ.get(self.endpoint_env or "", "")
        if not url:
            raise AnnotatorUnavailableError(
                f"annotator {self.id}: environment variable {self.endpoint_env} is not set"
            )
        return url


def load_annotator_specs(path: str | Path) -> list[AnnotatorSpec]:
    payload = json.loads(Path(path).read_text())
    specs = []
    for entry in payload:
        entry = dict(entry)
        if "consumes" in entry:
            entry["consumes"] = tuple(entry["consumes"])
        specs.append(AnnotatorSpec(**entry))
    return specs


# ----------------------------------------------------------------------
# backends


class MockAnnotator:
    """Deterministic pseudo-random labels keyed on (item_id, annotator, seed)."""

    def __init__(self, spec: AnnotatorSpec):
        self.spec = spec

    def annotate(self, payload: dict) -> AnnotationRecord:
        item_id = payload["item_id"]
        digest = hashlib.sha256(
            f"{item_id}|{self.spec.id}|{self.spec.seed}".encode()
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        mask = rng.random(len(EMOTIONS)) < 0.3
        if not mask.any():
            mask[int(rng.integers(0, len(EMOTIONS)))] = True
        return AnnotationRecord(
            item_id=item_id,
            annotator_id=self.spec.id,
            emotions=tuple(e for e, on in zip(EMOTIONS, mask) if on),
            personality=BIG_FIVE[int(rng.integers(0, len(BIG_FIVE)))],
            confidence=round(float(rng.uniform(0.3, 1.0)), 3),
            rationale=f"mock annotation by {self.spec.id} (prompt {self.spec.prompt_id})",
        )


class ScriptedAnnotator:
    """Returns exactly the fixture's record for each item; absent items error."""

    def __init__(self, spec: AnnotatorSpec, fixture: dict[str, dict]):
        self.spec = spec
        self.fixture = fixture

    def annotate(self, payload: dict) -> AnnotationRecord:
        item_id = payload["item_id"]
        if item_id not in self.fixture:
            raise KeyError(f"scripted annotator {self.spec.id}: no fixture for {item_id}")
        entry = dict(self.fixture[item_id])
        entry.setdefault("item_id", item_id)
        entry.setdefault("annotator_id", self.spec.id)
        return AnnotationRecord.from_dict(entry)


class RemoteAnnotator:
    """HTTP JSON client with bounded timeout, retries and request concurrency."""

    def __init__(
        self,
        spec: AnnotatorSpec,
        transport: httpx.BaseTransport | None = None,
        backoff_base: float = 0.5,
        max_concurrency: int = DEFAULT_CONCURRENCY,
    ):
        self.spec = spec
        self.backoff_base = backoff_base
        self._semaphore = threading.Semaphore(max_concurrency)
        headers = {}
        if spec.api_key_env and os.environ.get(spec.api_key_env):
            headers["Authorization"] = f"Bearer {os.environ[spec.api_key_env]}"
        self._client = httpx.Client(
            transport=transport, timeout=spec.timeout, headers=headers
        )

    def close(self) -> None:
        self._client.close()

    def annotate(self, payload: dict) -> AnnotationRecord:
        request = {
            "item_id": payload["item_id"],
            "prompt": self.spec.prompt or self.spec.prompt_id,
            "media_refs": {
                k: v
                for k, v in payload.get("media_refs", {}).items()
                if k in self.spec.consumes
            },
        }
        if self.spec.level == "high":
            request["prior_records"] = [
                r.to_dict() if isinstance(r, AnnotationRecord) else r
                for r in payload.get("prior_records", [])
            ]
        url = self.spec.endpoint()

        last_error: Exception | None = None
        for attempt in range(self.spec.retries):
            try:
                with self._semaphore:
                    response = self._client.post(url, json=request)
                break
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt + 1 < self.spec.retries:
                    time.sleep(self.backoff_base * 2**attempt)
        else:
            raise AnnotatorUnavailableError(
                f"annotator {self.spec.id}: {self.spec.retries} attempts failed "
                f"({last_error})"
            )
        return self._parse(payload["item_id"], response)

    def _parse(self, item_id: str, response: httpx.Response) -> AnnotationRecord:
        body = response.text
        if response.status_code != 200:
            raise MalformedResponseError(
                f"annotator {self.spec.id}: HTTP {response.status_code}", body
            )
        try:
            data = response.json()
        except (json.JSONDecodeError, ValueError):
            raise MalformedResponseError(
                f"annotator {self.spec.id}: response is not JSON", body
            ) from None
        try:
            return AnnotationRecord(
                item_id=item_id,
                annotator_id=self.spec.id,
                emotions=tuple(data.get("emotions", ())),
                personality=data.get("personality", ""),
                confidence=float(data.get("confidence", -1.0)),
                rationale=str(data.get("rationale", "")),
            )
        except (RecordError, TypeError) as exc:
            raise MalformedResponseError(
                f"annotator {self.spec.id}: invalid record ({exc})", body
            ) from None


def build_annotator(
    spec: AnnotatorSpec,
    fixtures: dict[str, dict[str, dict]] | None = None,
    transport: httpx.BaseTransport | None = None,
):
    if spec.kind == "mock":
        return MockAnnotator(spec)
    if spec.kind == "scripted":
        fixture = (fixtures or {}).get(spec.id)
        if fixture is None:
            raise ValueError(f"no fixture provided for scripted annotator {spec.id}")
        return ScriptedAnnotator(spec, fixture)
    return RemoteAnnotator(spec, transport=transport)


def annotate_item(annotator, payload: dict) -> AnnotationRecord:
    """Run one backend on one item payload."""
    return annotator.annotate(payload)
