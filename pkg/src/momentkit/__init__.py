"""Memory-efficient preprocessing for LLM-based video moment retrieval.

Frame embeddings are compressed by merging redundant neighbours through a
rank-1 truncated SVD, captions are produced per segment behind a pluggable
provider and re-weighted by their query relevance, and everything is
interleaved into a budgeted model-input sequence. Retrieval metrics and a
compression ablation harness are included.
"""

from .ablation import run_ablation
from .embeddings import FrameRecord, FrameSequence, cosine_similarity, l2_normalize, read_trace, write_trace
from .metrics import (
    EvalResult,
    MomentPrediction,
    TemporalSegment,
    evaluate,
    map_average,
    mean_average_precision,
    mean_iou,
    recall_at_k,
    temporal_iou,
)
from .modulation import ModulationConfig, ScoredCaption, caption_weight, modulate_captions
from .sequence import InterleavedSequence, MemoryBudget, assemble, footprint
from .svc import CompressionReport, SvcConfig, compress_pair, compress_sequence, truncated_svd_rank_k
from .synth import gen_trace

__version__ = "0.1.0"
