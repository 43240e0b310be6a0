"""LM access with two interchangeable backends.

The http backend talks to an OpenAI-compatible chat-completions endpoint.
The replay backend serves recorded fixtures: plain text files named by the
SHA-256 of (stage tag, whitespace-normalized prompt), indexed by a per-key
cursor so repeated identical prompts (the k candidate slots) consume
successive fixtures exactly as record mode wrote them. Replay mode performs
no network I/O of any kind.

Temperatures default per stage: 0.2 for code generation, 0.5 for sketching
and scoring; translation and canonicalization also default to 0.2 since they
demand the same syntactic precision as code.
"""

from __future__ import annotations

import enum
import hashlib
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path


class Stage(str, enum.Enum):
    TRANSLATE = "translate"
    SKETCH = "sketch"
    SYNTHESIZE_CODE = "code"
    SCORE = "score"
    CANONICALIZE = "canonicalize"


STAGE_TEMPERATURE = {
    Stage.TRANSLATE: 0.2,
    Stage.SKETCH: 0.5,
    Stage.SYNTHESIZE_CODE: 0.2,
    Stage.SCORE: 0.5,
    Stage.CANONICALIZE: 0.2,
}

API_KEY_ENV = "MEDMSA_LM_API_KEY"


class LmError(Exception):
    pass


class BackendUnavailable(LmError):
    pass


class RateLimited(LmError):
    def __init__(self, retry_after: float | None):
        self.retry_after = retry_after
        suffix = f" (retry after {retry_after}s)" if retry_after else ""
        super().__init__(f"rate limited{suffix}")


class FixtureMissing(LmError):
    """Replay mode had no fixture for a prompt. Carries the computed keys so
    the fixture files can be authored."""

    def __init__(self, missing: list[tuple[str, str, int]]):
        self.missing = missing
        described = ", ".join(f"{stage}/{key}.{index}.txt" for stage, key, index in missing)
        super().__init__(f"missing LM fixtures: {described}")


@dataclass(frozen=True)
class LmRequest:
    stage: Stage
    prompt: str
    temperature: float | None = None  # None -> stage default
    max_tokens: int = 1024
    stop_sequences: tuple = ()

    def resolved_temperature(self) -> float:
        if self.temperature is not None:
            if not (0.0 <= self.temperature <= 2.0):
                raise ValueError(f"temperature {self.temperature} outside [0, 2]")
            return self.temperature
        return STAGE_TEMPERATURE[self.stage]


@dataclass(frozen=True)
class LmResponse:
    text: str
    backend_id: str
    latency: float = 0.0
    fixture_key: str | None = None


def normalize_prompt(prompt: str) -> str:
    return " ".join(prompt.split())


def fixture_key(stage: Stage, prompt: str) -> str:
    material = stage.value + "\n" + normalize_prompt(prompt)
    return hashlib.sha256(material.encode()).hexdigest()


def fixture_path(fixture_dir: Path, stage: Stage, key: str, index: int) -> Path:
    return Path(fixture_dir) / stage.value / f"{key}.{index}.txt"


class LmBackend:
    """Interface: complete / complete_many. Implementations are thread-safe."""

    backend_id = "abstract"

    def complete(self, request: LmRequest) -> LmResponse:
        return self.complete_many(request, 1)[0]

    def complete_many(self, request: LmRequest, n: int) -> list[LmResponse]:
        raise NotImplementedError


class HttpBackend(LmBackend):
    def __init__(
        self,
        base_url: str,
        model_name: str,
        timeout: float = 120.0,
        api_key: str | None = None,
        transport=None,
    ):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.timeout = timeout
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.backend_id = f"http:{model_name}"
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete_many(self, request: LmRequest, n: int) -> list[LmResponse]:
        if n < 1:
            raise ValueError("n must be >= 1")
        return [self._one(request) for _ in range(n)]

    def _one(self, request: LmRequest) -> LmResponse:
        import httpx

        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.resolved_temperature(),
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        started = time.monotonic()
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions", json=payload, headers=headers
            )
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"LM endpoint unreachable: {exc}") from exc
        if response.status_code == 429:
            retry_after = response.headers.get("retry-after")
            raise RateLimited(float(retry_after) if retry_after else None)
        if response.status_code >= 400:
            raise BackendUnavailable(f"LM endpoint returned {response.status_code}: {response.text[:200]}")
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendUnavailable(f"malformed completion response: {exc}") from exc
        if not text:
            raise BackendUnavailable("empty completion text")
        return LmResponse(
            text=text, backend_id=self.backend_id, latency=time.monotonic() - started
        )


class ReplayBackend(LmBackend):
    """Serves recorded fixtures. A per-key cursor hands out fixture indices in
    call order, mirroring how record mode wrote them."""

    backend_id = "replay"

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete_many(self, request: LmRequest, n: int) -> list[LmResponse]:
        if n < 1:
            raise ValueError("n must be >= 1")
        key = fixture_key(request.stage, request.prompt)
        with self._lock:
            start = self._cursors.get(key, 0)
            paths = [fixture_path(self.fixture_dir, request.stage, key, start + i) for i in range(n)]
            missing = [
                (request.stage.value, key, start + i)
                for i, path in enumerate(paths)
                if not path.is_file()
            ]
            if missing:
                raise FixtureMissing(missing)
            self._cursors[key] = start + n
        return [
            LmResponse(text=path.read_text(), backend_id=self.backend_id, fixture_key=key)
            for path in paths
        ]


class RecordBackend(LmBackend):
    """Delegates to an inner backend and writes each response as a replay fixture."""

    backend_id = "record"

    def __init__(self, inner: LmBackend, fixture_dir: str | Path):
        self.inner = inner
        self.fixture_dir = Path(fixture_dir)
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete_many(self, request: LmRequest, n: int) -> list[LmResponse]:
        responses = self.inner.complete_many(request, n)
        key = fixture_key(request.stage, request.prompt)
        with self._lock:
            start = self._cursors.get(key, 0)
            self._cursors[key] = start + n
            for i, response in enumerate(responses):
                path = fixture_path(self.fixture_dir, request.stage, key, start + i)
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_text(response.text)
                tmp.replace(path)
        return [
            LmResponse(text=r.text, backend_id=self.backend_id, latency=r.latency, fixture_key=key)
            for r in responses
        ]


class LoggingLm(LmBackend):
    """Thin wrapper that records (stage, n) per call; the synthesis pipeline
    uses one per candidate to prove stage isolation."""

    def __init__(self, inner: LmBackend):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.calls: list[tuple[str, int]] = []

    def complete_many(self, request: LmRequest, n: int) -> list[LmResponse]:
        self.calls.append((request.stage.value, n))
        return self.inner.complete_many(request, n)

    def stage_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for stage, n in self.calls:
            counts[stage] = counts.get(stage, 0) + n
        return counts


def make_backend(
    backend: str,
    base_url: str = "",
    model_name: str = "",
    fixture_dir: str | Path = "",
    timeout: float = 120.0,
) -> LmBackend:
    if backend == "http":
        if not base_url or not model_name:
            raise ValueError("http backend needs base_url and model_name")
        return HttpBackend(base_url=base_url, model_name=model_name, timeout=timeout)
    if backend == "replay":
        if not fixture_dir:
            raise ValueError("replay backend needs fixture_dir")
        return ReplayBackend(fixture_dir)
    if backend == "record":
        if not base_url or not model_name:
            raise ValueError("record backend needs base_url and model_name")
        if not fixture_dir:
            raise ValueError("record backend needs fixture_dir")
        inner = HttpBackend(base_url=base_url, model_name=model_name, timeout=timeout)
        return RecordBackend(inner, fixture_dir)
    raise ValueError(f"unknown backend '{backend}' (expected http, replay or record)")
