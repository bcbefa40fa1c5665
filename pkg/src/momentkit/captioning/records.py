from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embeddings import FrameRecord, as_embedding

QUERY_GUIDED = "query_guided"
GENERIC = "generic"


@dataclass(frozen=True)
class SceneSegment:
    """A temporal slice ``[start, end)`` of the video and the frame standing in for it."""

    segment_id: int
    start: float
    end: float
    representative_frame: FrameRecord | None = None

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"segment {self.segment_id}: start {self.start} must be < end {self.end}")

    @property
    def span(self) -> tuple[float, float]:
        return (self.start, self.end)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start + self.end)


@dataclass(frozen=True)
class CaptionRecord:
    """Caption of one segment.

    ``path`` is ``"query_guided"`` exactly when the relevance check passed and
    a query-guided caption was produced. ``fallback`` marks records that ended
    up generic because a provider call failed.
    """

    segment: SceneSegment
    text: str
    embedding: np.ndarray
    path: str
    relevance_passed: bool
    fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "embedding", as_embedding(self.embedding))
        if self.path not in (QUERY_GUIDED, GENERIC):
            raise ValueError(f"unknown caption path {self.path!r}")
        if (self.path == QUERY_GUIDED) != bool(self.relevance_passed):
            raise ValueError("path must be query_guided exactly when relevance_passed is true")

    def __eq__(self, other):
        if not isinstance(other, CaptionRecord):
            return NotImplemented
        return (
            self.segment == other.segment
            and self.text == other.text
            and self.path == other.path
            and self.relevance_passed == other.relevance_passed
            and self.fallback == other.fallback
            and np.array_equal(self.embedding, other.embedding)
        )

    __hash__ = None
