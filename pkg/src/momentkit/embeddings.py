"""Embedding vectors, timestamped frame streams and the trace file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionError,
    FormatError,
    NumericError,
    OrderingError,
)

__all__ = [
    "as_embedding",
    "cosine_similarity",
    "l2_normalize",
    "nearest_index",
    "FrameRecord",
    "FrameSequence",
    "dumps_trace",
    "loads_trace",
    "write_trace",
    "read_trace",
]


def as_embedding(values) -> np.ndarray:
    """Coerce ``values`` to a read-only 1-D float64 array, rejecting NaN/Inf."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"embedding must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("embedding contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1].

    Inputs need not be normalized. A zero vector raises
    :class:`DegenerateInputError` rather than returning 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    if not (np.any(a) and np.any(b)):
        raise DegenerateInputError("cosine similarity of a zero vector is undefined")
    aa = float(np.dot(a, a))
    bb = float(np.dot(b, b))
    denom = math.sqrt(aa * bb)
    if not math.isfinite(denom) or denom == 0.0:
        # squared norms over/underflowed; rescale by the largest entry
        a = a / np.max(np.abs(a))
        b = b / np.max(np.abs(b))
        aa = float(np.dot(a, a))
        bb = float(np.dot(b, b))
        denom = math.sqrt(aa * bb)
    sim = float(np.dot(a, b)) / denom
    return min(1.0, max(-1.0, sim))


def l2_normalize(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return a / norm


def nearest_index(timestamps, t: float) -> int:
    """Index of the timestamp closest to ``t``; ties go to the earlier one."""
    ts = np.asarray(timestamps, dtype=np.float64)
    if ts.size == 0:
        raise IndexError("no timestamps to search")
    j = int(np.searchsorted(ts, t))
    if j == 0:
        return 0
    if j == ts.size:
        return ts.size - 1
    return j - 1 if t - ts[j - 1] <= ts[j] - t else j


@dataclass(frozen=True)
class FrameRecord:
    """One sampled frame: its ordinal, time in seconds and embedding.

    ``merged_span`` is set once compression has folded later frames into this
    record and covers the timestamps of every source frame.
    """

    frame_index: int
    timestamp: float
    embedding: np.ndarray
    merged_span: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "embedding", as_embedding(self.embedding))
        object.__setattr__(self, "timestamp", float(self.timestamp))
        if self.timestamp < 0 or not math.isfinite(self.timestamp):
            raise ValueError(f"timestamp must be a finite non-negative real, got {self.timestamp}")
        if self.merged_span is not None:
            start, end = (float(x) for x in self.merged_span)
            if start > end:
                raise ValueError(f"merged_span start {start} exceeds end {end}")
            if not start <= self.timestamp <= end:
                raise ValueError(f"timestamp {self.timestamp} outside merged_span [{start}, {end}]")
            object.__setattr__(self, "merged_span", (start, end))

    @property
    def dimension(self) -> int:
        return self.embedding.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FrameRecord):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.timestamp == other.timestamp
            and self.merged_span == other.merged_span
            and np.array_equal(self.embedding, other.embedding)
        )

    __hash__ = None


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frame stream of one video.

    Timestamps must be strictly increasing and no later than ``duration``.
    ``metadata`` holds any extra header keys of a trace file (for instance the
    plateau manifest written by :func:`momentkit.synth.gen_trace`).
    """

    frames: tuple[FrameRecord, ...]
    duration: float
    source_id: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "duration", float(self.duration))
        if frames:
            dim = frames[0].dimension
            for fr in frames[1:]:
                if fr.dimension != dim:
                    raise DimensionError(
                        f"frame {fr.frame_index} has dimension {fr.dimension}, expected {dim}"
                    )
            for prev, cur in zip(frames, frames[1:]):
                if not cur.timestamp > prev.timestamp:
                    raise OrderingError(
                        f"timestamps not strictly increasing at frame {cur.frame_index} "
                        f"({prev.timestamp} -> {cur.timestamp})"
                    )
            last = frames[-1]
            if last.timestamp > self.duration or (
                last.merged_span is not None and last.merged_span[1] > self.duration
            ):
                raise OrderingError(
                    f"frame {last.frame_index} at {last.timestamp}s exceeds duration {self.duration}s"
                )

    @classmethod
    def from_arrays(cls, timestamps, embeddings, duration=None, source_id="", metadata=None):
        embeddings = np.asarray(embeddings, dtype=np.float64)
        timestamps = np.asarray(timestamps, dtype=np.float64)
        if embeddings.ndim != 2 or embeddings.shape[0] != timestamps.shape[0]:
            raise DimensionError("need one embedding row per timestamp")
        if duration is None:
            duration = float(timestamps[-1]) if timestamps.size else 0.0
        frames = [FrameRecord(i, t, e) for i, (t, e) in enumerate(zip(timestamps, embeddings))]
        return cls(frames, duration, source_id, dict(metadata or {}))

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def dimension(self) -> int | None:
        return self.frames[0].dimension if self.frames else None

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([f.timestamp for f in self.frames], dtype=np.float64)

    @property
    def embeddings(self) -> np.ndarray:
        if not self.frames:
            return np.empty((0, 0))
        return np.vstack([f.embedding for f in self.frames])

    def replace_frames(self, frames: Iterable[FrameRecord]) -> "FrameSequence":
        return FrameSequence(tuple(frames), self.duration, self.source_id, dict(self.metadata))


# ---------------------------------------------------------------------------
# trace file: one JSON header line, then one JSON record per frame
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("dimension", "duration_sec", "source_id")


def _dump(obj) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def dumps_trace(seq: FrameSequence) -> str:
    dim = seq.dimension
    if dim is None:
        dim = int(seq.metadata.get("dimension", 0))
    header = {"dimension": dim, "duration_sec": seq.duration, "source_id": seq.source_id}
    for key, value in seq.metadata.items():
        if key not in header:
            header[key] = value
    lines = [_dump(header)]
    for fr in seq.frames:
        rec = {
            "frame_index": int(fr.frame_index),
            "timestamp_sec": fr.timestamp,
            "embedding": [float(x) for x in fr.embedding],
        }
        if fr.merged_span is not None:
            rec["merged_span"] = [fr.merged_span[0], fr.merged_span[1]]
        lines.append(_dump(rec))
    return "\n".join(lines) + "\n"


def loads_trace(text: str) -> FrameSequence:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("trace is empty: missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad trace header: {exc}") from None
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise FormatError(f"trace header lacks {missing}")
    dim = int(header["dimension"])
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            span = rec.get("merged_span")
            fr = FrameRecord(
                int(rec["frame_index"]),
                rec["timestamp_sec"],
                rec["embedding"],
                tuple(span) if span is not None else None,
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"line {lineno}: malformed frame record ({exc})") from None
        if fr.dimension != dim:
            raise DimensionError(f"line {lineno}: embedding dimension {fr.dimension} != header {dim}")
        frames.append(fr)
    metadata = {k: v for k, v in header.items() if k not in _HEADER_KEYS}
    if not frames:
        metadata["dimension"] = dim
    return FrameSequence(tuple(frames), header["duration_sec"], str(header["source_id"]), metadata)


def write_trace(seq: FrameSequence, path) -> None:
    Path(path).write_text(dumps_trace(seq), encoding="utf-8")


def read_trace(path) -> FrameSequence:
    return loads_trace(Path(path).read_text(encoding="utf-8"))
