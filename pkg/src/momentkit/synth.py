"""Seeded synthetic embedding traces with planted redundancy.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so a
seed reproduces a trace bit for bit on any platform numpy supports.
"""

from __future__ import annotations

import math

import numpy as np

from .embeddings import FrameSequence
from .errors import ConfigError
from .metrics import TemporalSegment


def gen_trace(n_frames: int, dimension: int, plateaus: int = 1, noise: float = 0.05, seed: int = 0,
              spacing: float = 1.0, source_id: str | None = None) -> FrameSequence:
    """Trace of ``plateaus`` runs of near-duplicate frames.

    Plateau centres are orthonormal, so frames of different plateaus are
    nearly orthogonal. Each frame is its plateau centre plus isotropic
    Gaussian noise of expected norm ``noise``; with ``noise=0`` every frame of
    a plateau is the same vector. Frame ``i`` sits at ``i * spacing`` seconds
    and the video lasts ``n_frames * spacing``.

    The header metadata records the generator arguments and, under
    ``"plateaus"``, the planted boundaries (inclusive frame range and
    ``[start_sec, end_sec)``).
    """
    if n_frames < 1 or dimension < 1:
        raise ConfigError("n_frames and dimension must be positive")
    if not 1 <= plateaus <= n_frames:
        raise ConfigError(f"plateaus must lie in [1, n_frames], got {plateaus}")
    if plateaus > dimension:
        raise ConfigError(f"cannot plant {plateaus} orthogonal plateaus in dimension {dimension}")
    if not (noise >= 0 and math.isfinite(noise)) or not spacing > 0:
        raise ConfigError("noise must be finite and non-negative, spacing positive")

    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dimension, plateaus)))
    centers = q.T
    sizes = [len(c) for c in np.array_split(np.arange(n_frames), plateaus)]

    rows = []
    bounds = []
    first = 0
    for p, size in enumerate(sizes):
        for _ in range(size):
            rows.append(centers[p] + noise * rng.standard_normal(dimension) / math.sqrt(dimension))
        last = first + size - 1
        bounds.append({
            "start_frame": first,
            "end_frame": last,
            "start_sec": first * spacing,
            "end_sec": (last + 1) * spacing,
        })
        first = last + 1

    meta = {
        "generator": {"n_frames": n_frames, "dimension": dimension, "plateaus": plateaus,
                      "noise": noise, "seed": seed, "spacing": spacing, "prng": "numpy.PCG64"},
        "plateaus": bounds,
    }
    timestamps = np.arange(n_frames) * spacing
    return FrameSequence.from_arrays(timestamps, np.array(rows), n_frames * spacing,
                                     source_id if source_id is not None else f"synthetic-{seed}", meta)


def plateau_segments(trace: FrameSequence) -> list[TemporalSegment]:
    """Planted plateau spans of a generated trace, as ground-truth moments."""
    try:
        return [TemporalSegment(b["start_sec"], b["end_sec"]) for b in trace.metadata["plateaus"]]
    except KeyError:
        raise ConfigError("trace carries no plateau manifest") from None
