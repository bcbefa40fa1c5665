"""Moment-retrieval metrics: temporal IoU, Recall@K, mAP and mIoU.

Every metric takes one ranked prediction list per query and the query's
ground truth, either a single :class:`TemporalSegment` or a list of them.
Results are percentages. Averages use ``math.fsum`` so they do not depend on
the order queries were scored in.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import DimensionError, EmptyInputError, FormatError

__all__ = [
    "TemporalSegment",
    "MomentPrediction",
    "EvalResult",
    "MAP_AVG_THRESHOLDS",
    "temporal_iou",
    "rank_predictions",
    "recall_at_k",
    "average_precision",
    "mean_average_precision",
    "map_average",
    "mean_iou",
    "evaluate",
    "read_moments",
    "align_moments",
]

# 0.5, 0.55, ..., 0.95
MAP_AVG_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class TemporalSegment:
    start: float
    end: float

    def __post_init__(self):
        if not (0 <= self.start < self.end) or not math.isfinite(self.end):
            raise ValueError(f"invalid segment [{self.start}, {self.end}]")

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class MomentPrediction:
    segment: TemporalSegment
    confidence: float = 1.0


@dataclass
class EvalResult:
    r1_at: dict = field(default_factory=dict)
    map_at: dict = field(default_factory=dict)
    map_avg: float = 0.0
    miou: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r1_at"] = {str(k): v for k, v in self.r1_at.items()}
        d["map_at"] = {str(k): v for k, v in self.map_at.items()}
        return d


def temporal_iou(a: TemporalSegment, b: TemporalSegment) -> float:
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0:
        return 0.0
    return inter / (a.length + b.length - inter)


def rank_predictions(preds) -> list[MomentPrediction]:
    """Sort by confidence, highest first; ties go to the earlier start."""
    return sorted(preds, key=lambda p: (-p.confidence, p.segment.start))


def _gt_list(gt):
    return [gt] if isinstance(gt, TemporalSegment) else list(gt)


def _check(preds_per_query, gts):
    if len(gts) == 0:
        raise EmptyInputError("no queries to evaluate")
    if len(preds_per_query) != len(gts):
        raise DimensionError(f"{len(preds_per_query)} prediction lists for {len(gts)} queries")


def recall_at_k(preds_per_query, gts, k: int = 1, threshold: float = 0.5) -> float:
    """Percentage of queries with a ground-truth hit (IoU >= threshold) among the top ``k``."""
    _check(preds_per_query, gts)
    if k < 1:
        raise ValueError("k must be at least 1")
    hits = 0
    for preds, gt in zip(preds_per_query, gts):
        gt = _gt_list(gt)
        top = rank_predictions(preds)[:k]
        if any(temporal_iou(p.segment, g) >= threshold for p in top for g in gt):
            hits += 1
    return 100.0 * hits / len(gts)


def average_precision(preds, gt, threshold: float) -> float:
    """Interpolated average precision of one query, in [0, 1].

    Walking the ranked predictions, each one is a true positive if it reaches
    ``threshold`` IoU with a ground-truth segment not yet claimed (the one it
    overlaps most). AP sums, over true positives, ``1 / len(gt)`` times the
    best precision attained at that rank or later.
    """
    gt = _gt_list(gt)
    if not gt:
        return 0.0
    claimed = [False] * len(gt)
    tp = []
    for p in rank_predictions(preds):
        best, best_iou = -1, -1.0
        for j, g in enumerate(gt):
            if claimed[j]:
                continue
            iou = temporal_iou(p.segment, g)
            if iou >= threshold and iou > best_iou:
                best, best_iou = j, iou
        if best >= 0:
            claimed[best] = True
        tp.append(best >= 0)
    if not tp:
        return 0.0
    precision = []
    hits = 0
    for i, t in enumerate(tp):
        hits += t
        precision.append(hits / (i + 1))
    # precision envelope, right to left
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    return math.fsum(precision[i] for i, t in enumerate(tp) if t) / len(gt)


def mean_average_precision(preds_per_query, gts, threshold: float = 0.5) -> float:
    _check(preds_per_query, gts)
    return 100.0 * math.fsum(
        average_precision(p, g, threshold) for p, g in zip(preds_per_query, gts)
    ) / len(gts)


def map_average(preds_per_query, gts, thresholds=MAP_AVG_THRESHOLDS) -> float:
    """Mean of mAP over ``thresholds`` (default 0.5:0.05:0.95)."""
    return math.fsum(mean_average_precision(preds_per_query, gts, t) for t in thresholds) / len(thresholds)


def mean_iou(preds_per_query, gts) -> float:
    """Mean IoU of each query's top-1 prediction with its best-matching ground truth.

    A query without predictions contributes 0.
    """
    _check(preds_per_query, gts)
    total = []
    for preds, gt in zip(preds_per_query, gts):
        ranked = rank_predictions(preds)
        if not ranked:
            total.append(0.0)
            continue
        total.append(max(temporal_iou(ranked[0].segment, g) for g in _gt_list(gt)))
    return 100.0 * math.fsum(total) / len(gts)


def evaluate(preds_per_query, gts, r1_thresholds=(0.5, 0.7), map_thresholds=(0.5, 0.75)) -> EvalResult:
    return EvalResult(
        r1_at={t: recall_at_k(preds_per_query, gts, 1, t) for t in r1_thresholds},
        map_at={t: mean_average_precision(preds_per_query, gts, t) for t in map_thresholds},
        map_avg=map_average(preds_per_query, gts),
        miou=mean_iou(preds_per_query, gts),
    )


# line-delimited moment files: {query_id, start, end[, confidence]}
def read_moments(path) -> dict:
    """Group the records of a moment file by ``query_id``, keeping first-seen order."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            seg = TemporalSegment(float(rec["start"]), float(rec["end"]))
            conf = float(rec.get("confidence", 1.0))
            qid = str(rec["query_id"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        out.setdefault(qid, []).append(MomentPrediction(seg, conf))
    return out


def align_moments(predictions: dict, ground_truth: dict):
    """Prediction lists and ground-truth lists in ground-truth query order.

    Raises :class:`EmptyInputError` when either side has no records.
    """
    if not predictions:
        raise EmptyInputError("prediction file has no records")
    if not ground_truth:
        raise EmptyInputError("ground-truth file has no records")
    qids = list(ground_truth)
    preds = [predictions.get(q, []) for q in qids]
    gts = [[m.segment for m in ground_truth[q]] for q in qids]
    return preds, gts
