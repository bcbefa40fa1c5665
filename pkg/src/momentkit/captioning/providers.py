"""Caption / QA / text-embedding providers.

A provider is any object with ``respond(request) -> ProviderResponse``. It may
set ``max_concurrency``; ``None`` means any number of requests may be in
flight, ``1`` forces sequential use.

Shipped implementations:

* :class:`ScriptedProvider` - answers from callables, for tests.
* :class:`HashProvider` - stable pseudo-random answers derived from a hash of
  the request, for desk-scale benchmarks.
* :class:`HttpProvider` - JSON over HTTP to an external model service.
* :class:`RecordingProvider` - wraps another provider and keeps a transcript
  with per-call latency.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Any, Callable, Protocol

import numpy as np

from ..errors import ConfigError, ProviderError

QA_RELEVANCE = "qa_relevance"
CAPTION_QUERY_GUIDED = "caption_query_guided"
CAPTION_GENERIC = "caption_generic"
EMBED_TEXT = "embed_text"
REQUEST_KINDS = (QA_RELEVANCE, CAPTION_QUERY_GUIDED, CAPTION_GENERIC, EMBED_TEXT)

QA_PROMPT = "Does this {term} appear in the scene?"
QUERY_CAPTION_PROMPT = "Generate a caption that is relevant to the query: {query}"
GENERIC_CAPTION_PROMPT = "Generate a caption for this scene."


@dataclass(frozen=True)
class ProviderRequest:
    kind: str
    prompt: str
    segment_id: int | None = None
    image_ref: str | None = None
    query: str | None = None

    def __post_init__(self):
        if self.kind not in REQUEST_KINDS:
            raise ConfigError(f"unknown request kind {self.kind!r}")

    def to_wire(self) -> dict:
        body = {"kind": self.kind, "prompt": self.prompt}
        if self.image_ref is not None:
            body["image_ref"] = self.image_ref
        if self.query is not None:
            body["query"] = self.query
        if self.segment_id is not None:
            body["segment_id"] = self.segment_id
        return body


@dataclass(frozen=True)
class ProviderResponse:
    answer: Any


class Provider(Protocol):
    max_concurrency: int | None

    def respond(self, request: ProviderRequest) -> ProviderResponse: ...


def coerce_answer(kind: str, answer, segment_id=None):
    """Validate a raw answer for ``kind``: bool, caption string or float vector."""
    if kind == QA_RELEVANCE:
        if isinstance(answer, (bool, np.bool_)):
            return bool(answer)
        if isinstance(answer, str) and answer.strip().lower() in ("yes", "no"):
            return answer.strip().lower() == "yes"
        raise ProviderError(f"QA answer must be yes/no, got {answer!r}", segment_id)
    if kind in (CAPTION_QUERY_GUIDED, CAPTION_GENERIC):
        if not isinstance(answer, str) or not answer.strip():
            raise ProviderError(f"caption must be a non-empty string, got {answer!r}", segment_id)
        return answer.strip()
    try:
        vec = np.asarray(answer, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProviderError("embedding answer is not numeric", segment_id) from None
    if vec.ndim != 1 or vec.size == 0 or not np.all(np.isfinite(vec)) or not np.any(vec):
        raise ProviderError("embedding must be a finite, nonzero 1-D vector", segment_id)
    return vec


def call(provider, request: ProviderRequest):
    """Send ``request`` and return the validated answer.

    Any exception from the provider is re-raised as :class:`ProviderError`
    tagged with the request's segment.
    """
    try:
        resp = provider.respond(request)
    except ProviderError:
        raise
    except Exception as exc:  # provider implementations are foreign code
        raise ProviderError(f"{request.kind} failed: {exc}", request.segment_id) from exc
    return coerce_answer(request.kind, resp.answer, request.segment_id)


class ScriptedProvider:
    """Deterministic provider driven by plain callables.

    Parameters
    ----------
    qa : bool or callable(segment_id, prompt) -> bool
    caption : callable(kind, segment_id, prompt) -> str, optional
    embed : callable(text) -> vector, optional
        Defaults to :func:`hash_embedding` of dimension ``dimension``.
    fail : callable(request) -> bool, optional
        Requests for which it returns true raise ``RuntimeError``.
    """

    max_concurrency = None

    def __init__(self, qa=False, caption=None, embed=None, fail=None, dimension=8):
        self._qa = qa if callable(qa) else (lambda seg, prompt, _v=bool(qa): _v)
        self._caption = caption or (lambda kind, seg, prompt: f"{kind} caption of segment {seg}")
        self._embed = embed or (lambda text: hash_embedding(text, dimension))
        self._fail = fail

    def respond(self, request):
        if self._fail is not None and self._fail(request):
            raise RuntimeError(f"scripted failure for {request.kind}")
        if request.kind == QA_RELEVANCE:
            return ProviderResponse(self._qa(request.segment_id, request.prompt))
        if request.kind == EMBED_TEXT:
            return ProviderResponse(self._embed(request.prompt))
        return ProviderResponse(self._caption(request.kind, request.segment_id, request.prompt))


def _digest(*parts) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def hash_embedding(text: str, dimension: int, seed: int = 0) -> np.ndarray:
    """Unit vector drawn from a PCG64 stream seeded by a hash of ``text``."""
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(_digest(seed, text)[:8], "little")))
    v = rng.standard_normal(dimension)
    return v / np.linalg.norm(v)


_WORDS = (
    "person", "room", "table", "street", "car", "dog", "child", "kitchen", "window", "door",
    "walks", "sits", "talks", "holds", "looks", "moves", "stands", "opens", "smiles", "turns",
)


class HashProvider:
    """Stable synthetic answers keyed on ``(seed, segment_id, prompt)``.

    QA answers are yes with probability ``yes_rate`` per question; captions
    are short word strings, query-guided ones quoting the query; embeddings
    are :func:`hash_embedding` of the text so equal texts embed equally.
    """

    max_concurrency = None

    def __init__(self, dimension: int = 64, seed: int = 0, yes_rate: float = 0.5):
        if dimension < 1:
            raise ConfigError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self.yes_rate = yes_rate

    def respond(self, request):
        d = _digest(self.seed, request.kind, request.segment_id, request.prompt)
        if request.kind == QA_RELEVANCE:
            return ProviderResponse(d[0] < self.yes_rate * 256)
        if request.kind == EMBED_TEXT:
            return ProviderResponse(hash_embedding(request.prompt, self.dimension, self.seed))
        words = [_WORDS[b % len(_WORDS)] for b in d[1:7]]
        text = " ".join(words)
        if request.kind == CAPTION_QUERY_GUIDED and request.query:
            text = f"{request.query.strip().rstrip('.')}: {text}"
        return ProviderResponse(text)


class HttpProvider:
    """Client for an external model service.

    One endpoint, ``POST`` with a JSON body ``{kind, prompt, image_ref?,
    query?, segment_id?}``; the reply is ``{"answer": ...}`` where the answer
    is ``"yes"``/``"no"`` (or a JSON bool), a caption string, or a list of
    floats. Failed calls are retried ``retries`` times.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2,
                 max_concurrency: int | None = 4):
        if retries < 0 or timeout <= 0:
            raise ConfigError("timeout must be positive and retries non-negative")
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.max_concurrency = max_concurrency

    def respond(self, request):
        body = json.dumps(request.to_wire()).encode("utf-8")
        last = None
        for _ in range(self.retries + 1):
            req = urllib.request.Request(
                self.endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
            )
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                return ProviderResponse(payload["answer"])
            except (urllib.error.URLError, OSError, ValueError, KeyError) as exc:
                last = exc
        raise ProviderError(f"{request.kind} request to {self.endpoint} failed: {last}", request.segment_id)


@dataclass(frozen=True)
class CallRecord:
    kind: str
    segment_id: int | None
    prompt: str
    latency: float
    ok: bool


class RecordingProvider:
    """Pass-through provider that logs every request with its wall time."""

    def __init__(self, inner, clock: Callable[[], float] = time.perf_counter):
        self.inner = inner
        self.clock = clock
        self.max_concurrency = getattr(inner, "max_concurrency", None)
        self.transcript: list[CallRecord] = []
        self._lock = threading.Lock()

    def respond(self, request):
        t0 = self.clock()
        ok = False
        try:
            resp = self.inner.respond(request)
            ok = True
            return resp
        finally:
            rec = CallRecord(request.kind, request.segment_id, request.prompt, self.clock() - t0, ok)
            with self._lock:
                self.transcript.append(rec)

    def count(self, kind: str) -> int:
        return sum(1 for r in self.transcript if r.kind == kind)

    def calls_for(self, kind: str) -> list[CallRecord]:
        return [r for r in self.transcript if r.kind == kind]
