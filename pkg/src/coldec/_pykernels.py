"""Reference implementations of the hot kernels (numpy / pure Python).

These are always importable and are used whenever the compiled
``_ckernels`` extension is missing or ``COLDEC_PURE_PYTHON`` is set.
Both backends must agree exactly; ``tests/test_kernels.py`` checks it.
"""
from __future__ import annotations

import numpy as np

# Relative slack when deciding whether the accumulator reached the threshold.
FIRE_TOL = 1e-12


def cif_fire(frames, weights, threshold, fire_tail):
    """Integrate-and-fire over ``frames`` (T x D) with per-frame ``weights``.

    Returns ``(embeddings, integrated)`` where ``integrated[i]`` is the total
    weight that went into ``embeddings[i]``.
    """
    frames = np.asarray(frames, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    T, D = frames.shape
    tol = FIRE_TOL * threshold
    acc = 0.0
    state = np.zeros(D)
    fired = []
    integrated = []
    for t in range(T):
        w = float(weights[t])
        if w == 0.0:
            continue
        f = frames[t]
        while acc + w >= threshold - tol:
            used = min(threshold - acc, w)
            if used < 0.0:
                used = 0.0
            fired.append(state + used * f)
            integrated.append(acc + used)
            w -= used
            acc = 0.0
            state = np.zeros(D)
        acc += w
        state = state + w * f
    if fire_tail and acc > 0.0 and acc >= threshold / 2.0:
        fired.append(state)
        integrated.append(acc)
    emb = np.array(fired, dtype=np.float64).reshape(len(fired), D)
    return emb, np.array(integrated, dtype=np.float64)


def edit_distance(a, b):
    """Levenshtein distance between two integer sequences (unit costs)."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def topk_desc(values, k):
    """Indices of the ``k`` largest values, largest first; ties -> lower index.

    Uses ``np.partition`` to locate the k-th value, so the cost is linear in
    ``len(values)`` plus a sort of the ``k`` survivors.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    k = min(int(k), n)
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    if k < n:
        kth = -np.partition(-v, k - 1)[k - 1]
        above = np.flatnonzero(v > kth)
        level = np.flatnonzero(v == kth)[: k - above.shape[0]]
        idx = np.concatenate([above, level])
    else:
        idx = np.arange(n)
    order = np.lexsort((idx, -v[idx]))
    return idx[order].astype(np.int64)
