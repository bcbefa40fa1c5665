"""Caption generation on demand versus from a pre-computed store.

Both modes ask one yes/no question per query term and segment. On-demand
mode then captions every segment; store mode keeps the stored generic
caption and only re-captions the segments that passed the check.
"""

from momentkit import gen_trace
from momentkit.captioning import (
    HashProvider,
    RecordingProvider,
    build_caption_store,
    generate_captions,
    latency_breakdown,
    parse_query,
    segment_video,
)
from momentkit.captioning.providers import REQUEST_KINDS

trace = gen_trace(n_frames=60, dimension=32, plateaus=3, seed=1, spacing=0.5)
segments = segment_video(trace.duration, 2.0, trace)
intent = parse_query("a man holding a child")
print(f"{len(segments)} segments, query terms: objects={intent.objects} actions={intent.actions}")

provider = HashProvider(dimension=32, seed=1, yes_rate=0.2)
store = build_caption_store(segments, provider, trace.source_id)

for mode in ("SE", "LE"):
    rec = RecordingProvider(provider)
    caps = generate_captions(segments, intent, rec, mode, store if mode == "LE" else None, trace.source_id)
    relevant = [c.segment.segment_id for c in caps if c.relevance_passed]
    print(f"\n{mode}: relevant segments {relevant}")
    for kind in REQUEST_KINDS:
        print(f"    {kind:<22} {rec.count(kind):3d} calls")
    print("    stage time:", {k: f"{v * 1e3:.2f} ms" for k, v in latency_breakdown(rec.transcript, mode).items()})
