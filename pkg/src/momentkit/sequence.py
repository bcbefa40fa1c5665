"""Interleaved model-input sequence and its vector-slot accounting.

Layout::

    t_0, f_0, [captions paired with f_0], t_1, f_1, ..., duration, query, instruction

Time payloads are whole seconds. A caption follows the frame nearest its
segment midpoint and carries its modulated (score-scaled) embedding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .embeddings import FrameSequence, nearest_index
from .errors import BudgetError, FormatError, OrderingError

__all__ = [
    "SLOT_KINDS",
    "TokenSlot",
    "MemoryBudget",
    "InterleavedSequence",
    "round_half_away",
    "assemble",
    "footprint",
    "write_manifest",
    "read_manifest",
]

SLOT_KINDS = ("time", "frame", "caption", "duration_meta", "query", "instruction")
VECTOR_KINDS = ("frame", "caption")
TEXT_KINDS = ("query", "instruction")
MANIFEST_MAGIC = "# interleaved-manifest v1"


def round_half_away(x: float) -> int:
    """Nearest integer, halves rounded away from zero (2.5 -> 3, -2.5 -> -3)."""
    if x < 0:
        return -round_half_away(-x)
    r = math.floor(x)
    # x - floor(x) is exact in binary floating point
    return int(r + 1 if x - r >= 0.5 else r)


@dataclass(frozen=True)
class TokenSlot:
    kind: str
    payload: object
    source_ref: int | None = None

    def __post_init__(self):
        if self.kind not in SLOT_KINDS:
            raise ValueError(f"unknown slot kind {self.kind!r}")
        if self.kind in ("time", "duration_meta"):
            if isinstance(self.payload, bool) or not isinstance(self.payload, (int, np.integer)) or self.payload < 0:
                raise ValueError(f"{self.kind} payload must be a non-negative integer, got {self.payload!r}")
        elif self.kind in VECTOR_KINDS:
            if not isinstance(self.payload, np.ndarray) or self.payload.ndim != 1:
                raise ValueError(f"{self.kind} payload must be a 1-D vector")
        elif not isinstance(self.payload, str):
            raise ValueError(f"{self.kind} payload must be text")

    @property
    def is_vector(self) -> bool:
        return self.kind in VECTOR_KINDS

    def __eq__(self, other):
        if not isinstance(other, TokenSlot):
            return NotImplemented
        if self.kind != other.kind or self.source_ref != other.source_ref:
            return False
        if self.is_vector:
            return np.array_equal(self.payload, other.payload)
        return self.payload == other.payload

    __hash__ = None


@dataclass(frozen=True)
class MemoryBudget:
    """Vector-slot budget; ``max_vector_slots=None`` means unbounded."""

    max_vector_slots: int | None = None
    used_vector_slots: int = 0
    used_text_chars: int = 0


@dataclass(frozen=True)
class InterleavedSequence:
    slots: tuple[TokenSlot, ...]
    budget: MemoryBudget

    def __len__(self):
        return len(self.slots)

    def kinds(self) -> list[str]:
        return [s.kind for s in self.slots]

    def vectors(self) -> np.ndarray:
        vecs = [s.payload for s in self.slots if s.is_vector]
        return np.vstack(vecs) if vecs else np.empty((0, 0))


def assemble(frames: FrameSequence, captions, query: str, instruction: str,
             budget: MemoryBudget | None = None) -> InterleavedSequence:
    """Interleave frames and modulated captions and append the fixed tail.

    ``captions`` is a list of :class:`~momentkit.modulation.ScoredCaption`.
    Captions paired with the same frame keep their input order. Without any
    frames, captions are emitted in input order directly before the tail.

    Raises
    ------
    OrderingError
        Frame timestamps are not strictly increasing.
    BudgetError
        More frame + caption slots than ``budget.max_vector_slots``; the
        exception's ``overflow`` is the excess.
    """
    budget = budget or MemoryBudget()
    records = list(frames)
    for prev, cur in zip(records, records[1:]):
        if not cur.timestamp > prev.timestamp:
            raise OrderingError(f"frames out of order at index {cur.frame_index}")
    captions = list(captions)
    need = len(records) + len(captions)
    if budget.max_vector_slots is not None and need > budget.max_vector_slots:
        overflow = need - budget.max_vector_slots
        raise BudgetError(
            f"{len(records)} frame + {len(captions)} caption slots exceed the budget of "
            f"{budget.max_vector_slots} by {overflow}",
            overflow,
        )

    attached = [[] for _ in records]
    loose = []
    if records:
        ts = np.array([r.timestamp for r in records])
        for sc in captions:
            attached[nearest_index(ts, sc.caption.segment.midpoint)].append(sc)
    else:
        loose = captions

    def caption_slot(sc):
        return TokenSlot("caption", np.asarray(sc.reweighted_embedding, dtype=np.float64),
                         sc.caption.segment.segment_id)

    slots = []
    for rec, caps in zip(records, attached):
        slots.append(TokenSlot("time", round_half_away(rec.timestamp), rec.frame_index))
        slots.append(TokenSlot("frame", rec.embedding, rec.frame_index))
        slots.extend(caption_slot(sc) for sc in caps)
    slots.extend(caption_slot(sc) for sc in loose)
    slots.append(TokenSlot("duration_meta", round_half_away(frames.duration)))
    slots.append(TokenSlot("query", query))
    slots.append(TokenSlot("instruction", instruction))

    seq = InterleavedSequence(tuple(slots), budget)
    return replace(seq, budget=footprint(seq))


def footprint(seq: InterleavedSequence) -> MemoryBudget:
    """Exact slot and character counts of an assembled sequence."""
    vec = sum(1 for s in seq.slots if s.is_vector)
    chars = sum(len(s.payload) for s in seq.slots if s.kind in TEXT_KINDS)
    return MemoryBudget(seq.budget.max_vector_slots, vec, chars)


def write_manifest(seq: InterleavedSequence, path) -> Path:
    """Write a text manifest at ``path`` and float32 vectors to ``path + '.f32'``.

    Manifest lines are ``kind<TAB>payload<TAB>source_ref``. Vector payloads
    read ``@<byte offset>+<float count>`` into the little-endian float32
    sidecar; text payloads are JSON strings; ``-`` marks a missing source.
    Returns the sidecar path.
    """
    path = Path(path)
    sidecar = path.with_name(path.name + ".f32")
    lines = [f"{MANIFEST_MAGIC} sidecar={sidecar.name} slots={len(seq.slots)} "
             f"max_vector_slots={seq.budget.max_vector_slots if seq.budget.max_vector_slots is not None else '-'}"]
    blobs = []
    offset = 0
    for s in seq.slots:
        if s.is_vector:
            blob = np.asarray(s.payload, dtype="<f4").tobytes()
            payload = f"@{offset}+{s.payload.shape[0]}"
            offset += len(blob)
            blobs.append(blob)
        elif s.kind in TEXT_KINDS:
            payload = json.dumps(s.payload)
        else:
            payload = str(int(s.payload))
        ref = "-" if s.source_ref is None else str(s.source_ref)
        lines.append(f"{s.kind}\t{payload}\t{ref}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar.write_bytes(b"".join(blobs))
    return sidecar


def read_manifest(path) -> InterleavedSequence:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(MANIFEST_MAGIC):
        raise FormatError(f"{path} is not an interleaved manifest")
    meta = dict(tok.split("=", 1) for tok in lines[0][len(MANIFEST_MAGIC):].split())
    blob = (path.parent / meta["sidecar"]).read_bytes()
    slots = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            kind, payload, ref = line.split("\t")
            if kind in VECTOR_KINDS:
                off, count = payload[1:].split("+")
                payload = np.frombuffer(blob, dtype="<f4", count=int(count), offset=int(off)).astype(np.float64)
            elif kind in TEXT_KINDS:
                payload = json.loads(payload)
            else:
                payload = int(payload)
            slots.append(TokenSlot(kind, payload, None if ref == "-" else int(ref)))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    mv = meta.get("max_vector_slots", "-")
    seq = InterleavedSequence(tuple(slots), MemoryBudget(None if mv == "-" else int(mv)))
    return replace(seq, budget=footprint(seq))
