"""Weighting captions by how well they agree with the query and their frame.

Each caption is scored as alpha1 * cos(frame, query) plus alpha2 times the
product of the rectified query-caption and frame-caption cosines, then its
embedding is scaled by that score.
"""

import math

import numpy as np

from momentkit import FrameSequence, ModulationConfig, modulate_captions
from momentkit.captioning import GENERIC, QUERY_GUIDED, CaptionRecord, SceneSegment


def at(deg):
    r = math.radians(deg)
    return np.array([math.cos(r), math.sin(r)])


query = at(0)
frames = FrameSequence.from_arrays([1.0, 3.0, 5.0], [at(10), at(60), at(120)], 6.0)
captions = [
    CaptionRecord(SceneSegment(0, 0, 2), "a man lifts a child", at(5), QUERY_GUIDED, True),
    CaptionRecord(SceneSegment(1, 2, 4), "people by a window", at(70), GENERIC, False),
    # an off-frame caption that happens to match the query
    CaptionRecord(SceneSegment(2, 4, 6), "a man holding a child", at(0), QUERY_GUIDED, True),
]

for cfg in (ModulationConfig(), ModulationConfig(1.0, 0.0), ModulationConfig(0.0, 1.0)):
    scored = modulate_captions(frames, captions, query, cfg)
    print(f"alpha1={cfg.alpha1}, alpha2={cfg.alpha2}")
    for sc in scored:
        norm = np.linalg.norm(sc.reweighted_embedding)
        print(f"    {sc.caption.text:<24} score {sc.score:+.3f}  |c'| = {norm:.3f}")

# Scaling both alphas changes the scores but never their order.
base = [sc.score for sc in modulate_captions(frames, captions, query)]
big = [sc.score for sc in modulate_captions(frames, captions, query, ModulationConfig().scaled(10))]
print("order unchanged under x10:", np.argsort(base).tolist() == np.argsort(big).tolist())
