"""Independent reference implementations used as test oracles.

Nothing here imports momentkit internals: each routine re-derives its
answer from first principles (dense SVD from numpy, plain loops) so a bug in
the library cannot leak into the expected value.
"""

import math

import numpy as np


def ref_cosine(a, b):
    dot = math.fsum(x * y for x, y in zip(a, b))
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    return dot / (na * nb)


def ref_rank_k(m, k):
    """Rank-k reconstruction and discarded energy via LAPACK's dense SVD."""
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    approx = (u[:, :k] * s[:k]) @ vt[:k]
    return approx, float(np.sum(s[k:] ** 2))


def ref_gram_rank1(m):
    """Rank-1 reconstruction from numpy's symmetric eigensolver on M M^T."""
    m = np.asarray(m, dtype=float)
    w, v = np.linalg.eigh(m @ m.T)
    u1 = v[:, np.argmax(w)]
    return np.outer(u1, u1) @ m, float(np.min(w))


def ref_walk(embeddings, theta, k=1):
    """Anchor walk written from the textual rule, with dense-SVD compression.

    Returns (slot embeddings, slot source indices, merges as (anchor, absorbed, sim)).
    """
    embs = [np.asarray(e, dtype=float) for e in embeddings]
    out_vecs = [embs[0]]
    out_src = [0]
    merges = []
    for i in range(1, len(embs)):
        anchor = out_vecs[-1]
        sim = ref_cosine(anchor, embs[i])
        if sim > theta:
            approx, _ = ref_rank_k(np.vstack([anchor, embs[i]]), k)
            out_vecs[-1] = approx.mean(axis=0)
            merges.append((out_src[-1], i, sim))
        else:
            out_vecs.append(embs[i])
            out_src.append(i)
    return out_vecs, out_src, merges


def ref_iou(a, b):
    (s1, e1), (s2, e2) = a, b
    inter = max(0.0, min(e1, e2) - max(s1, s2))
    union = (e1 - s1) + (e2 - s2) - inter
    return inter / union


def _ranked(preds):
    # preds: list of (start, end, conf)
    return sorted(preds, key=lambda p: (-p[2], p[0]))


def ref_recall(preds_per_query, gts_per_query, k, thr):
    hits = 0
    for preds, gts in zip(preds_per_query, gts_per_query):
        top = _ranked(preds)[:k]
        found = False
        for p in top:
            for g in gts:
                if ref_iou(p[:2], g) >= thr:
                    found = True
        hits += found
    return 100.0 * hits / len(gts_per_query)


def ref_ap(preds, gts, thr):
    """Interpolated AP by exhaustive walk over every rank cut-off."""
    ranked = _ranked(preds)
    if not ranked or not gts:
        return 0.0
    used = set()
    is_tp = []
    for p in ranked:
        order = sorted(range(len(gts)), key=lambda j: (-ref_iou(p[:2], gts[j]), j))
        hit = None
        for j in order:
            if j not in used and ref_iou(p[:2], gts[j]) >= thr:
                hit = j
                break
        if hit is not None:
            used.add(hit)
        is_tp.append(hit is not None)
    n = len(ranked)
    prec = [sum(is_tp[: r + 1]) / (r + 1) for r in range(n)]
    total = 0.0
    for r in range(n):
        if is_tp[r]:
            total += max(prec[r:])
    return total / len(gts)


def ref_map(preds_per_query, gts_per_query, thr):
    return 100.0 * sum(ref_ap(p, g, thr) for p, g in zip(preds_per_query, gts_per_query)) / len(gts_per_query)


def ref_map_avg(preds_per_query, gts_per_query):
    thrs = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
    return sum(ref_map(preds_per_query, gts_per_query, t) for t in thrs) / len(thrs)


def ref_miou(preds_per_query, gts_per_query):
    vals = []
    for preds, gts in zip(preds_per_query, gts_per_query):
        if not preds:
            vals.append(0.0)
            continue
        top = _ranked(preds)[0]
        vals.append(max(ref_iou(top[:2], g) for g in gts))
    return 100.0 * sum(vals) / len(vals)
