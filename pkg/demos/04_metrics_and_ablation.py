"""Retrieval metrics and a comparison of pair-compression strategies.

The first part scores a handful of predictions by hand. The second runs the
ablation harness on synthetic traces: every strategy merges the same pairs,
so their reconstruction errors are directly comparable.
"""

import numpy as np

from momentkit import MomentPrediction, SvcConfig, TemporalSegment, evaluate, gen_trace
from momentkit.ablation import format_table, run_ablation
from momentkit.synth import plateau_segments

gts = [TemporalSegment(10, 20), TemporalSegment(30, 45)]
preds = [
    [MomentPrediction(TemporalSegment(11, 21), 0.9), MomentPrediction(TemporalSegment(0, 5), 0.4)],
    [MomentPrediction(TemporalSegment(0, 8), 0.8), MomentPrediction(TemporalSegment(32, 44), 0.7)],
]
res = evaluate(preds, gts)
print("R1:", res.r1_at, " mAP:", {k: round(v, 2) for k, v in res.map_at.items()})
print(f"mAP avg {res.map_avg:.2f}, mIoU {res.miou:.2f}")

trace = gen_trace(n_frames=40, dimension=16, plateaus=4, noise=0.3, seed=3)
rows = run_ablation(trace, plateau_segments(trace), cfg=SvcConfig(theta=0.9))
print()
print(format_table(rows), end="")

totals = {"svd": 0.0, "average_pooling": 0.0, "frame_selection": 0.0}
for seed in range(20):
    t = gen_trace(n_frames=30, dimension=16, plateaus=3, noise=0.3, seed=seed)
    for r in run_ablation(t, [], cfg=SvcConfig(theta=0.9)):
        totals[r.strategy] += r.reconstruction_error
print("\nmean reconstruction error over 20 traces:")
for name, total in sorted(totals.items(), key=lambda kv: kv[1]):
    print(f"    {name:<16} {total / 20:.4f}")
