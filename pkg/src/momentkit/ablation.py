"""Compare pair-compression strategies on one trace.

The merge plan (which frames fold into which slot) comes from the
similarity walk of :func:`momentkit.svc.compress_sequence`, so every strategy
yields the same slot count. Strategies differ in how each merged stacked pair
``M = [anchor; frame]`` is represented:

``svd``
    rank-k truncated SVD of ``M``; error is the discarded energy.
``average_pooling``
    both rows replaced by their mean; error ``|anchor - frame|^2 / 2``.
``frame_selection``
    the absorbed frame is dropped and the anchor stands in for both rows;
    error ``|anchor - frame|^2``.

All three replacements have rank at most one, so on the same pairs the SVD
error is never the largest (Eckart-Young). Slot embeddings for the
retrieval proxy are the SVD walk's output, the mean of the group's original
frames, and the group's first frame, respectively.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .embeddings import FrameSequence, as_embedding
from .errors import ConfigError, EmptyInputError
from .metrics import MomentPrediction, TemporalSegment, evaluate, temporal_iou
from .svc import SvcConfig, compress_sequence, truncated_svd_rank_k

__all__ = ["STRATEGIES", "AblationRow", "pair_error", "proxy_predict", "run_ablation", "format_table"]

STRATEGIES = ("frame_selection", "average_pooling", "svd")
COLUMNS = ("strategy", "input_slots", "output_slots", "reconstruction_error", "frame_error",
           "r1_0.5", "r1_0.7", "map_0.5", "map_0.75", "map_avg", "miou")


@dataclass
class AblationRow:
    strategy: str
    input_slots: int
    output_slots: int
    reconstruction_error: float
    frame_error: float
    r1_05: float
    r1_07: float
    map_05: float
    map_075: float
    map_avg: float
    miou: float

    def values(self):
        return list(asdict(self).values())


def pair_error(strategy: str, pair, rank_k: int = 1) -> float:
    """Squared Frobenius error of ``strategy``'s replacement of a 2 x D pair."""
    pair = np.asarray(pair, dtype=np.float64)
    diff = pair[0] - pair[1]
    if strategy == "svd":
        return truncated_svd_rank_k(pair, rank_k)[1]
    if strategy == "average_pooling":
        return 0.5 * float(diff @ diff)
    if strategy == "frame_selection":
        return float(diff @ diff)
    raise ConfigError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


def _slot_bounds(seq: FrameSequence) -> list[tuple[float, float]]:
    ts = [f.timestamp for f in seq]
    ends = ts[1:] + [seq.duration]
    return [(s, max(e, s)) for s, e in zip(ts, ends)]


def proxy_predict(slot_embeddings, bounds, query, length_weight: float = 0.1,
                  n_candidates: int = 5, nms_iou: float = 0.7) -> list[MomentPrediction]:
    """Stand-in retrieval model for relative comparisons.

    Each slot scores its cosine with ``query``; every contiguous slot run is
    scored ``mean(slot scores) + length_weight * run_length / n_slots``. The
    best runs, after suppressing ones overlapping a better run by more than
    ``nms_iou``, become predictions with the run score as confidence.
    """
    emb = np.asarray(slot_embeddings, dtype=np.float64)
    q = as_embedding(query)
    s = emb @ q / (np.linalg.norm(emb, axis=1) * np.linalg.norm(q))
    n = s.shape[0]
    csum = np.concatenate([[0.0], np.cumsum(s)])
    cands = []
    for i in range(n):
        for j in range(i, n):
            length = j - i + 1
            score = (csum[j + 1] - csum[i]) / length + length_weight * length / n
            start, end = bounds[i][0], bounds[j][1]
            if end > start:
                cands.append((score, start, end))
    cands.sort(key=lambda c: (-c[0], c[1]))
    out = []
    for score, start, end in cands:
        seg = TemporalSegment(start, end)
        if all(temporal_iou(seg, p.segment) <= nms_iou for p in out):
            out.append(MomentPrediction(seg, float(score)))
            if len(out) == n_candidates:
                break
    return out


def run_ablation(trace: FrameSequence, gts, strategies=STRATEGIES, cfg: SvcConfig | None = None,
                 queries=None, length_weight: float = 0.1) -> list[AblationRow]:
    """One comparison row per strategy.

    Parameters
    ----------
    trace : FrameSequence
    gts : list of TemporalSegment
        One ground-truth moment per query.
    queries : list of vectors, optional
        Query embedding per ground truth. Defaults to the mean of the
        original frames inside each ground-truth span.
    """
    cfg = cfg or SvcConfig()
    strategies = list(strategies)
    for name in strategies:
        if name not in STRATEGIES:
            raise ConfigError(f"unknown strategy {name!r}; choose from {STRATEGIES}")
    if not len(trace):
        raise EmptyInputError("cannot ablate an empty trace")
    gts = list(gts)
    emb = trace.embeddings
    ts = trace.timestamps
    if queries is None:
        queries = []
        for g in gts:
            inside = (ts >= g.start) & (ts < g.end)
            if not inside.any():
                raise EmptyInputError(f"no frames inside ground truth [{g.start}, {g.end})")
            queries.append(emb[inside].mean(axis=0))

    pairs = []
    compressed, report = compress_sequence(
        trace, cfg, observer=lambda slot, pair, merge: pairs.append(pair)
    )
    # group membership of every original frame, by output slot
    slot_of = np.zeros(len(trace), dtype=int)
    pos = {fr.frame_index: k for k, fr in enumerate(trace)}
    for k, fr in enumerate(compressed):
        slot_of[pos[fr.frame_index]] = k
    for m in report.merges:
        slot_of[pos[m.absorbed_index]] = slot_of[pos[m.anchor_index]]
    n_out = len(compressed)
    bounds = _slot_bounds(compressed)

    rows = []
    for name in strategies:
        if name == "svd":
            slots = compressed.embeddings
        elif name == "average_pooling":
            slots = np.vstack([emb[slot_of == k].mean(axis=0) for k in range(n_out)])
        else:
            slots = np.vstack([emb[np.argmax(slot_of == k)] for k in range(n_out)])
        rec_err = math.fsum(pair_error(name, p, cfg.rank_k) for p in pairs)
        frame_err = math.fsum(float(d @ d) for d in emb - slots[slot_of])
        if gts:
            preds = [proxy_predict(slots, bounds, q, length_weight) for q in queries]
            res = evaluate(preds, gts)
            metrics = (res.r1_at[0.5], res.r1_at[0.7], res.map_at[0.5], res.map_at[0.75], res.map_avg, res.miou)
        else:
            metrics = (math.nan,) * 6
        rows.append(AblationRow(name, len(trace), n_out, rec_err, frame_err, *metrics))
    return rows


def format_table(rows, delimiter: str = "\t") -> str:
    """Delimiter-separated table with a header line, columns in ``COLUMNS`` order."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([v if isinstance(v, (str, int)) else repr(float(v)) for v in r.values()])
    return buf.getvalue()
