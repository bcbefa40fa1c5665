"""Compressing a trace with runs of near-duplicate frames.

A synthetic trace with three plateaus is walked frame by frame. Frames close
enough to the running anchor fold into it through a rank-1 SVD of the
stacked pair, so each plateau ends up as one slot.
"""

import numpy as np

from momentkit import SvcConfig, compress_sequence, gen_trace

trace = gen_trace(n_frames=30, dimension=64, plateaus=3, noise=0.05, seed=0)
print(f"input: {len(trace)} frames of dimension {trace.dimension}")

for theta in (0.999, 0.95, 0.5, -1.0):
    out, report = compress_sequence(trace, SvcConfig(theta=theta))
    spans = [f.merged_span or (f.timestamp, f.timestamp) for f in out]
    print(f"theta={theta:>6}: {len(out):2d} slots, discarded energy {report.total_reconstruction_error:.4f}")
    if len(out) <= 3:
        for f, (a, b) in zip(out, spans):
            print(f"    slot from frame {f.frame_index:2d} covers [{a:.0f}s, {b:.0f}s]")

# The compressed vector stays close to the plateau centre.
out, _ = compress_sequence(trace, SvcConfig(theta=0.95))
emb = trace.embeddings
for k, f in enumerate(out):
    block = emb[10 * k:10 * (k + 1)].mean(axis=0)
    cos = f.embedding @ block / (np.linalg.norm(f.embedding) * np.linalg.norm(block))
    print(f"slot {k}: cosine with the plateau mean = {cos:.5f}")
