"""Query-guided captioning: query parsing, relevance checks and the SE/LE caption pipeline."""

from .pipeline import (
    CaptionStore,
    build_caption_store,
    classify_relevance,
    generate_captions,
    latency_breakdown,
    read_captions,
    segment_video,
    write_captions,
)
from .providers import (
    HashProvider,
    HttpProvider,
    ProviderRequest,
    ProviderResponse,
    RecordingProvider,
    ScriptedProvider,
    hash_embedding,
)
from .query import QueryIntent, load_lexicon, parse_query
from .records import GENERIC, QUERY_GUIDED, CaptionRecord, SceneSegment

__all__ = [
    "CaptionRecord",
    "CaptionStore",
    "GENERIC",
    "HashProvider",
    "HttpProvider",
    "ProviderRequest",
    "ProviderResponse",
    "QUERY_GUIDED",
    "QueryIntent",
    "RecordingProvider",
    "SceneSegment",
    "ScriptedProvider",
    "build_caption_store",
    "classify_relevance",
    "generate_captions",
    "hash_embedding",
    "latency_breakdown",
    "load_lexicon",
    "parse_query",
    "read_captions",
    "segment_video",
    "write_captions",
]
