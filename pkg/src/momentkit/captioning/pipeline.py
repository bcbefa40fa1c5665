"""Query-guided caption generation over fixed-length scene segments.

Each segment is checked for the query's objects and actions with yes/no
questions. Relevant segments get a query-guided caption, the rest a generic
one. In ``"SE"`` (storage-efficient) mode every caption is produced on
demand; in ``"LE"`` (latency-efficient) mode generic captions come from a
pre-computed :class:`CaptionStore` and only relevant segments are
re-captioned.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..embeddings import FrameSequence, nearest_index
from ..errors import ConfigError, EmptyInputError, FormatError, ProviderError, StoreMissingError
from .providers import (
    CAPTION_GENERIC,
    CAPTION_QUERY_GUIDED,
    EMBED_TEXT,
    GENERIC_CAPTION_PROMPT,
    QA_PROMPT,
    QA_RELEVANCE,
    QUERY_CAPTION_PROMPT,
    ProviderRequest,
    call,
)
from .query import QueryIntent
from .records import GENERIC, QUERY_GUIDED, CaptionRecord, SceneSegment

logger = logging.getLogger(__name__)

MODES = ("SE", "LE")
AGGREGATIONS = ("any", "all")
_SPAN_TOL = 1e-9


def segment_video(duration: float, interval: float, frames: FrameSequence) -> list[SceneSegment]:
    """Tile ``[0, duration)`` with ``interval``-second segments.

    The last segment is cut at ``duration``. Each segment's representative
    frame is the one nearest its midpoint, the earlier one on ties.
    """
    if not interval > 0 or not duration > 0:
        raise ConfigError(f"duration and interval must be positive, got {duration}, {interval}")
    if not len(frames):
        raise EmptyInputError("no frames to pick segment representatives from")
    # guard against ratios such as 3.0000000000000004
    n = max(1, math.ceil(duration / interval - 1e-9))
    ts = frames.timestamps
    out = []
    for i in range(n):
        start = i * interval
        end = duration if i == n - 1 else (i + 1) * interval
        rep = frames[nearest_index(ts, 0.5 * (start + end))]
        out.append(SceneSegment(i, start, end, rep))
    return out


def _image_ref(seg: SceneSegment, source_id: str):
    fr = seg.representative_frame
    if fr is None:
        return None
    return f"{source_id}#frame={fr.frame_index}"


def classify_relevance(seg: SceneSegment, intent: QueryIntent, provider, aggregation: str = "any",
                       source_id: str = "") -> bool:
    """Ask one yes/no question per object and action of ``intent``.

    Every question is asked even once the outcome is known, so the number of
    provider calls per segment is fixed. ``aggregation`` is ``"any"`` (one yes
    suffices) or ``"all"``.
    """
    if aggregation not in AGGREGATIONS:
        raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    terms = intent.terms
    if not terms:
        raise ConfigError("query intent has no objects or actions to check")
    ref = _image_ref(seg, source_id)
    answers = [
        call(provider, ProviderRequest(QA_RELEVANCE, QA_PROMPT.format(term=t), seg.segment_id, ref,
                                       intent.raw_query))
        for t in terms
    ]
    return any(answers) if aggregation == "any" else all(answers)


class CaptionStore:
    """Pre-computed generic captions keyed by ``(source_id, segment_id)``.

    On disk: one JSON object per line, ``{source_id, segment_id, start, end,
    text}``.
    """

    def __init__(self, records=()):
        self._records = {}
        for rec in records:
            self.add(**rec)

    def add(self, source_id, segment_id, start, end, text):
        self._records[(str(source_id), int(segment_id))] = (float(start), float(end), str(text))

    def __len__(self):
        return len(self._records)

    def lookup(self, source_id: str, seg: SceneSegment) -> str:
        try:
            start, end, text = self._records[(source_id, seg.segment_id)]
        except KeyError:
            raise StoreMissingError(f"no stored caption for {source_id!r} segment {seg.segment_id}") from None
        if abs(start - seg.start) > _SPAN_TOL or abs(end - seg.end) > _SPAN_TOL:
            raise StoreMissingError(
                f"stored caption for {source_id!r} segment {seg.segment_id} spans [{start}, {end}), "
                f"expected [{seg.start}, {seg.end}); store built with another interval"
            )
        return text

    def check(self, source_id: str, segments) -> None:
        """Raise :class:`StoreMissingError` unless the store covers ``segments`` exactly."""
        ends = [end for (sid, _), (_, end, _) in self._records.items() if sid == source_id]
        if not ends:
            raise StoreMissingError(f"caption store has no entries for {source_id!r}")
        duration = segments[-1].end if segments else 0.0
        if abs(max(ends) - duration) > _SPAN_TOL:
            raise StoreMissingError(
                f"caption store for {source_id!r} ends at {max(ends)}s but the video lasts {duration}s (stale store)"
            )
        for seg in segments:
            self.lookup(source_id, seg)

    def records(self):
        for (sid, seg_id), (start, end, text) in sorted(self._records.items()):
            yield {"source_id": sid, "segment_id": seg_id, "start": start, "end": end, "text": text}

    def dumps(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.records())

    @classmethod
    def loads(cls, text: str) -> "CaptionStore":
        store = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                store.add(**json.loads(line))
            except (json.JSONDecodeError, TypeError) as exc:
                raise FormatError(f"caption store line {lineno}: {exc}") from None
        return store

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CaptionStore":
        path = Path(path)
        if not path.exists():
            raise StoreMissingError(f"caption store {path} does not exist")
        return cls.loads(path.read_text(encoding="utf-8"))


def build_caption_store(segments, provider, source_id: str = "") -> CaptionStore:
    """Offline pass producing a generic caption for every segment (LE pre-computation)."""
    store = CaptionStore()
    for seg in segments:
        text = call(provider, ProviderRequest(CAPTION_GENERIC, GENERIC_CAPTION_PROMPT, seg.segment_id,
                                              _image_ref(seg, source_id)))
        store.add(source_id, seg.segment_id, seg.start, seg.end, text)
    return store


def _caption_one(seg, intent, provider, mode, store, source_id, aggregation):
    ref = _image_ref(seg, source_id)
    fallback = False
    try:
        relevant = classify_relevance(seg, intent, provider, aggregation, source_id)
    except ProviderError as exc:
        logger.warning("relevance check failed, using generic caption: %s", exc)
        relevant, fallback = False, True

    text = None
    if relevant:
        try:
            text = call(provider, ProviderRequest(CAPTION_QUERY_GUIDED, QUERY_CAPTION_PROMPT.format(
                query=intent.raw_query), seg.segment_id, ref, intent.raw_query))
        except ProviderError as exc:
            logger.warning("query-guided caption failed, using generic caption: %s", exc)
            fallback = True
    path = QUERY_GUIDED if text is not None else GENERIC
    if text is None:
        if mode == "LE":
            text = store.lookup(source_id, seg)
        else:
            text = call(provider, ProviderRequest(CAPTION_GENERIC, GENERIC_CAPTION_PROMPT, seg.segment_id, ref))
    emb = call(provider, ProviderRequest(EMBED_TEXT, text, seg.segment_id))
    return CaptionRecord(seg, text, emb, path, path == QUERY_GUIDED, fallback)


def generate_captions(segments, intent: QueryIntent, provider, mode: str = "SE",
                      store: CaptionStore | None = None, source_id: str = "",
                      aggregation: str = "any", max_workers: int = 1) -> list[CaptionRecord]:
    """One :class:`CaptionRecord` per segment, in segment order.

    Provider failures during the relevance check or query-guided captioning
    degrade that segment to its generic caption (``fallback=True``). A failed
    generic caption or text embedding has no fallback and raises.

    Segments are processed concurrently when ``max_workers > 1`` (capped by
    the provider's ``max_concurrency``); output order never depends on
    completion order.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if aggregation not in AGGREGATIONS:
        raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    segments = list(segments)
    if mode == "LE":
        if store is None:
            raise StoreMissingError("LE mode needs a pre-computed caption store")
        store.check(source_id, segments)

    def work(seg):
        return _caption_one(seg, intent, provider, mode, store, source_id, aggregation)

    cap = getattr(provider, "max_concurrency", None)
    workers = max(1, min(max_workers, cap) if cap else max_workers)
    if workers == 1:
        return [work(seg) for seg in segments]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, segments))


def latency_breakdown(transcript, mode: str) -> dict:
    """Total provider time per pipeline stage, from a :class:`RecordingProvider` transcript.

    Keys: ``QAF`` (relevance questions) plus ``QGC`` in SE mode (all on-demand
    captioning) or ``SRC`` in LE mode (selective re-captioning).
    """
    qa = math.fsum(r.latency for r in transcript if r.kind == QA_RELEVANCE)
    if mode == "SE":
        cap = math.fsum(r.latency for r in transcript if r.kind in (CAPTION_QUERY_GUIDED, CAPTION_GENERIC))
        return {"QAF": qa, "QGC": cap}
    if mode == "LE":
        cap = math.fsum(r.latency for r in transcript if r.kind == CAPTION_QUERY_GUIDED)
        return {"QAF": qa, "SRC": cap}
    raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")


# caption record files
def dumps_captions(captions) -> str:
    lines = []
    for c in captions:
        rec = {
            "segment_id": c.segment.segment_id,
            "start": c.segment.start,
            "end": c.segment.end,
            "text": c.text,
            "path": c.path,
            "relevance_passed": c.relevance_passed,
            "fallback": c.fallback,
            "embedding": [float(x) for x in c.embedding],
        }
        lines.append(json.dumps(rec, separators=(",", ":"), allow_nan=False))
    return "".join(line + "\n" for line in lines)


def loads_captions(text: str) -> list[CaptionRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            seg = SceneSegment(int(rec["segment_id"]), rec["start"], rec["end"])
            out.append(CaptionRecord(seg, rec["text"], rec["embedding"], rec["path"],
                                     bool(rec["relevance_passed"]), bool(rec.get("fallback", False))))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"caption file line {lineno}: {exc}") from None
    return out


def write_captions(captions, path) -> None:
    Path(path).write_text(dumps_captions(captions), encoding="utf-8")


def read_captions(path) -> list[CaptionRecord]:
    return loads_captions(Path(path).read_text(encoding="utf-8"))
