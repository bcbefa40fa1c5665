"""Query-aware importance modulation of caption embeddings.

Each caption ``c`` paired with frame ``f`` gets a relevance score against the
query ``q``::

    S = alpha1 * cos(f, q) + alpha2 * Vbar(q, f, c)

and enters the model as ``S * c``. ``Vbar`` combines the rectified
query-caption and frame-caption cosines; the default is their product, so a
caption scores high only when it agrees with both the query and its frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .captioning.records import GENERIC, CaptionRecord, SceneSegment
from .embeddings import FrameSequence, as_embedding, cosine_similarity, nearest_index
from .errors import ConfigError, FormatError, PairingError

__all__ = [
    "ModulationConfig",
    "ScoredCaption",
    "visual_query_similarity",
    "refined_caption_similarity",
    "caption_weight",
    "pair_captions",
    "modulate_captions",
    "dumps_scored",
    "loads_scored",
    "write_scored",
    "read_scored",
]

VBAR_FORMS = ("product", "mean", "min")


@dataclass(frozen=True)
class ModulationConfig:
    alpha1: float = 0.7
    alpha2: float = 0.3
    vbar_form: str = "product"

    def __post_init__(self):
        if not (self.alpha1 >= 0 and self.alpha2 >= 0):
            raise ConfigError(f"alphas must be non-negative, got ({self.alpha1}, {self.alpha2})")
        if not self.alpha1 + self.alpha2 > 0:
            raise ConfigError("alpha1 + alpha2 must be positive")
        if self.vbar_form not in VBAR_FORMS:
            raise ConfigError(f"vbar_form must be one of {VBAR_FORMS}, got {self.vbar_form!r}")

    def scaled(self, s: float) -> "ModulationConfig":
        return ModulationConfig(self.alpha1 * s, self.alpha2 * s, self.vbar_form)


@dataclass(frozen=True)
class ScoredCaption:
    caption: CaptionRecord
    score: float
    reweighted_embedding: np.ndarray

    __hash__ = None


def visual_query_similarity(f, q) -> float:
    return cosine_similarity(f, q)


def refined_caption_similarity(q, f, c, form: str = "product") -> float:
    """Query-caption similarity refined by frame-caption agreement, in [0, 1].

    Both cosines are clipped at zero first, as in CLIPScore.
    """
    qc = max(0.0, cosine_similarity(q, c))
    fc = max(0.0, cosine_similarity(f, c))
    if form == "product":
        return qc * fc
    if form == "mean":
        return 0.5 * (qc + fc)
    if form == "min":
        return min(qc, fc)
    raise ConfigError(f"unknown vbar form {form!r}")


def caption_weight(f, c, q, cfg: ModulationConfig | None = None) -> float:
    cfg = cfg or ModulationConfig()
    return cfg.alpha1 * visual_query_similarity(f, q) + cfg.alpha2 * refined_caption_similarity(
        q, f, c, cfg.vbar_form
    )


def pair_captions(frames: FrameSequence, captions) -> list[int]:
    """Frame position paired with each caption: the one nearest its segment midpoint."""
    if not len(frames):
        raise PairingError("no frames to pair captions with")
    ts = frames.timestamps
    out = []
    for cap in captions:
        mid = cap.segment.midpoint
        if not 0.0 <= mid <= frames.duration:
            raise PairingError(
                f"caption of segment {cap.segment.segment_id} (midpoint {mid}s) lies outside "
                f"the video [0, {frames.duration}]"
            )
        out.append(nearest_index(ts, mid))
    return out


def modulate_captions(frames: FrameSequence, captions, q, cfg: ModulationConfig | None = None):
    """Score every caption against its paired frame and the query; order is preserved."""
    cfg = cfg or ModulationConfig()
    q = as_embedding(q)
    captions = list(captions)
    idx = pair_captions(frames, captions)
    out = []
    for cap, i in zip(captions, idx):
        score = caption_weight(frames[i].embedding, cap.embedding, q, cfg)
        out.append(ScoredCaption(cap, score, score * cap.embedding))
    return out


# line-delimited scored-caption records
def dumps_scored(scored) -> str:
    lines = []
    for sc in scored:
        cap = sc.caption
        rec = {
            "segment_id": cap.segment.segment_id,
            "segment_start": cap.segment.start,
            "segment_end": cap.segment.end,
            "score": float(sc.score),
            "caption_text": cap.text,
            "path": cap.path,
            "caption_embedding": [float(x) for x in cap.embedding],
        }
        lines.append(json.dumps(rec, separators=(",", ":"), allow_nan=False))
    return "".join(line + "\n" for line in lines)


def loads_scored(text: str) -> list[ScoredCaption]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            seg = SceneSegment(int(rec.get("segment_id", lineno - 1)), rec["segment_start"], rec["segment_end"])
            path = rec.get("path", GENERIC)
            emb = rec["caption_embedding"]
            score = float(rec["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"line {lineno}: malformed scored caption ({exc})") from None
        cap = CaptionRecord(seg, rec["caption_text"], emb, path, path != GENERIC)
        if not math.isfinite(score):
            raise FormatError(f"line {lineno}: non-finite score")
        out.append(ScoredCaption(cap, score, score * cap.embedding))
    return out


def write_scored(scored, path) -> None:
    Path(path).write_text(dumps_scored(scored), encoding="utf-8")


def read_scored(path) -> list[ScoredCaption]:
    return loads_scored(Path(path).read_text(encoding="utf-8"))
