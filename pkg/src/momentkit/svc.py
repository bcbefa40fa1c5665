"""Structured visual compression of redundant frame embeddings.

Frames are walked in order against a running anchor. A frame whose cosine
similarity to the anchor is strictly greater than ``theta`` is stacked with
the anchor into a 2 x D matrix, reduced by rank-k truncated SVD and the rows
of the reconstruction are averaged into a single embedding that takes the
anchor's slot. Any other frame is kept as is and becomes the next anchor.

The SVD of a 2 x D stack is obtained from the 2 x 2 Gram matrix in closed
form, so each merge costs O(D).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .embeddings import FrameRecord, FrameSequence, cosine_similarity
from .errors import ConfigError, DegenerateInputError, DimensionError, EmptyInputError, NumericError

__all__ = [
    "SvcConfig",
    "Merge",
    "CompressionReport",
    "stack_pair",
    "gram_eig_2x2",
    "truncated_svd_rank_k",
    "compress_pair",
    "compress_sequence",
]

DEFAULT_THETA = 0.95
ANCHOR_UPDATES = ("compressed", "original")


@dataclass(frozen=True)
class SvcConfig:
    """Compression settings.

    theta : float
        Merge threshold on cosine similarity (strict ``>``). Values above 1
        disable merging, -1 merges everything except antiparallel pairs.
    rank_k : {1, 2}
        Rank kept by the truncated SVD. ``2`` keeps the pair intact, so the
        compressed frame is the plain row mean.
    anchor_update : {"compressed", "original"}
        What later frames are compared against after a merge: the new
        compressed embedding (chain merging) or the slot's original frame.
    """

    theta: float = DEFAULT_THETA
    rank_k: int = 1
    anchor_update: str = "compressed"

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ConfigError(f"theta must be finite, got {self.theta}")
        if self.rank_k not in (1, 2):
            raise ConfigError(f"rank_k must be 1 or 2, got {self.rank_k}")
        if self.anchor_update not in ANCHOR_UPDATES:
            raise ConfigError(f"anchor_update must be one of {ANCHOR_UPDATES}, got {self.anchor_update!r}")


class Merge(NamedTuple):
    anchor_index: int
    absorbed_index: int
    similarity: float


@dataclass
class CompressionReport:
    input_count: int
    output_count: int
    merges: list[Merge] = field(default_factory=list)
    total_reconstruction_error: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["merges"] = [list(m) for m in self.merges]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def stack_pair(anchor, frame) -> np.ndarray:
    """Stack ``anchor`` (row 0) and ``frame`` (row 1) into a 2 x D matrix."""
    anchor = np.asarray(anchor, dtype=np.float64)
    frame = np.asarray(frame, dtype=np.float64)
    if anchor.ndim != 1 or anchor.shape != frame.shape:
        raise DimensionError(f"cannot stack shapes {anchor.shape} and {frame.shape}")
    return np.vstack([anchor, frame])


def gram_eig_2x2(m: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Eigen-decomposition of ``m @ m.T`` for a 2 x D matrix ``m``.

    Returns ``(lam1, lam2, u1)`` with ``lam1 >= lam2 >= 0`` the squared
    singular values of ``m`` and ``u1`` the unit left singular vector of
    ``lam1``.
    """
    a, b = m[0], m[1]
    p = float(a @ a)
    s = float(b @ b)
    r = float(a @ b)
    lam1 = 0.5 * (p + s) + math.hypot(0.5 * (p - s), r)
    if lam1 == 0.0:
        return 0.0, 0.0, np.array([1.0, 0.0])
    # det(G) = |longer row|^2 * |other row with the longer direction removed|^2,
    # which avoids the cancellation in p*s - r*r for near-parallel rows
    if p >= s:
        resid = b - (r / p) * a
        det = p * float(resid @ resid)
    else:
        resid = a - (r / s) * b
        det = s * float(resid @ resid)
    lam2 = max(0.0, det / lam1)

    c1 = np.array([r, lam1 - p])
    c2 = np.array([lam1 - s, r])
    n1 = math.hypot(*c1)
    n2 = math.hypot(*c2)
    if n1 == 0.0 and n2 == 0.0:
        u1 = np.array([1.0, 0.0])
    elif n1 >= n2:
        u1 = c1 / n1
    else:
        u1 = c2 / n2
    if u1[0] + u1[1] < 0:
        u1 = -u1
    return lam1, lam2, u1


def truncated_svd_rank_k(m, k: int = 1) -> tuple[np.ndarray, float]:
    """Best rank-``k`` Frobenius approximation of a stacked pair.

    Parameters
    ----------
    m : array_like, shape (2, D)
    k : {1, 2}

    Returns
    -------
    approx : ndarray, shape (2, D)
        ``U_k S_k V_k^T``, computed as ``u1 u1^T m`` for ``k == 1``.
    discarded_energy : float
        Sum of the squared singular values that were dropped, which equals
        ``||m - approx||_F^2``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != 2:
        raise DimensionError(f"expected a 2 x D stack, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("stacked pair contains non-finite entries")
    if k == 2:
        return m.copy(), 0.0
    if k != 1:
        raise ConfigError(f"rank k must be 1 or 2, got {k}")
    _, lam2, u1 = gram_eig_2x2(m)
    approx = np.outer(u1, u1 @ m)
    return approx, lam2


def _compress(anchor, frame, rank_k):
    approx, energy = truncated_svd_rank_k(stack_pair(anchor, frame), rank_k)
    return approx.mean(axis=0), energy


def compress_pair(anchor, frame, cfg: SvcConfig | None = None) -> np.ndarray:
    """Row mean of the rank-k reconstruction of ``[anchor; frame]``."""
    cfg = cfg or SvcConfig()
    anchor = np.asarray(anchor, dtype=np.float64)
    frame = np.asarray(frame, dtype=np.float64)
    if not (np.any(anchor) and np.any(frame)):
        raise DegenerateInputError("cannot compress a pair containing a zero vector")
    return _compress(anchor, frame, cfg.rank_k)[0]


def compress_sequence(seq: FrameSequence, cfg: SvcConfig | None = None, *, observer=None):
    """Merge redundant frames of ``seq`` in one anchor walk.

    Frame 0 is the initial anchor. A merged slot keeps the anchor's
    ``frame_index`` and timestamp and its ``merged_span`` grows to cover the
    absorbed frame.

    ``observer``, if given, is called as ``observer(slot, pair, merge)`` for
    every merge, where ``slot`` is the output position and ``pair`` the 2 x D
    stack that was compressed.

    Returns
    -------
    (FrameSequence, CompressionReport)
    """
    cfg = cfg or SvcConfig()
    frames = seq.frames
    if not frames:
        raise EmptyInputError("cannot compress an empty frame sequence")

    first = frames[0]
    # per output slot: [record, slot embedding, comparison anchor, span]
    slots = [[first, first.embedding, first.embedding, first.merged_span]]
    merges = []
    total_error = 0.0
    for fr in frames[1:]:
        slot = slots[-1]
        sim = cosine_similarity(slot[2], fr.embedding)
        if sim > cfg.theta:
            pair = stack_pair(slot[1], fr.embedding)
            approx, energy = truncated_svd_rank_k(pair, cfg.rank_k)
            merged = approx.mean(axis=0)
            total_error += energy
            slot[1] = merged
            if cfg.anchor_update == "compressed":
                slot[2] = merged
            src = slot[0]
            start = slot[3][0] if slot[3] else src.timestamp
            end = fr.merged_span[1] if fr.merged_span else fr.timestamp
            slot[3] = (start, end)
            merges.append(Merge(src.frame_index, fr.frame_index, sim))
            if observer is not None:
                observer(len(slots) - 1, pair, merges[-1])
        else:
            slots.append([fr, fr.embedding, fr.embedding, fr.merged_span])

    out = []
    for rec, emb, _, span in slots:
        if emb is rec.embedding and span == rec.merged_span:
            out.append(rec)
        else:
            out.append(FrameRecord(rec.frame_index, rec.timestamp, emb, span))
    report = CompressionReport(len(frames), len(out), merges, total_error)
    return seq.replace_frames(out), report
