"""Independent reference implementations used as test oracles."""

import functools
import itertools

import numpy as np


def brute_force_assignment(cost):
    """Minimum total cost over all injective maps gt(columns) -> pred(rows)."""
    n_pred, n_gt = cost.shape
    best = np.inf
    for perm in itertools.permutations(range(n_pred), n_gt):
        best = min(best, sum(cost[perm[j], j] for j in range(n_gt)))
    return best


def levenshtein_reference(a, b):
    from functools import lru_cache

    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def literal_query_vote(pc, pm, pb_or_B, T):
    """Direct transcription of boundary-aware query voting with explicit loops."""
    M, K1 = pc.shape
    K = K1 - 1
    cls = []
    for j in range(M):
        best, arg = -1.0, 0
        for c in range(K):
            if pc[j, c] > best:
                best, arg = pc[j, c], c
        cls.append(arg)
    B = list(pb_or_B)
    S = [0] * T
    for i in range(len(B) - 1 if len(B) > 1 else 1):
        lo = B[i] - 1
        hi = B[i + 1] - 1 if i + 1 < len(B) - 1 else T
        if len(B) == 1:
            lo, hi = 0, T
        w = []
        for j in range(M):
            s = 0.0
            for t in range(lo, hi):
                s += pm[j, t]
            w.append(s)
        k = 0
        for j in range(1, M):
            if w[j] > w[k]:
                k = j
        for t in range(lo, hi):
            S[t] = cls[k]
    return S


def literal_frame_vote(pc, pm, B, T):
    """Direct transcription of boundary-aware frame voting with explicit loops."""
    M, K1 = pc.shape
    K = K1 - 1
    S0 = []
    for t in range(T):
        scores = [sum(pm[j, t] * pc[j, c] for j in range(M)) for c in range(K)]
        best = 0
        for c in range(1, K):
            if scores[c] > scores[best]:
                best = c
        S0.append(best)
    B = list(B)
    S = [0] * T
    n_spans = max(len(B) - 1, 1)
    for i in range(n_spans):
        lo = B[i] - 1
        hi = B[i + 1] - 1 if i + 1 < len(B) - 1 else T
        if len(B) == 1:
            lo, hi = 0, T
        counts = {}
        for t in range(lo, hi):
            counts[S0[t]] = counts.get(S0[t], 0) + 1
        top = max(counts.values())
        act = min(c for c, n in counts.items() if n == top)
        for t in range(lo, hi):
            S[t] = act
    return S


def random_vote_instance(rng, max_T=50, max_M=8, max_K=5):
    T = int(rng.integers(1, max_T + 1))
    M = int(rng.integers(1, max_M + 1))
    K = int(rng.integers(1, max_K + 1))
    logits = rng.standard_normal((M, K + 1))
    pc = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    pm = rng.uniform(0, 1, size=(M, T))
    interior = rng.choice(np.arange(2, T), size=min(max(T - 2, 0), int(rng.integers(0, 6))), replace=False) if T > 2 else []
    B = sorted(set([1, T]) | set(int(x) for x in interior))
    return pc, pm, B, T


@functools.lru_cache(maxsize=None)
def levenshtein_memo(a: tuple, b: tuple) -> int:
    """Same recursion as ``levenshtein_reference`` with one cache shared across calls,
    so exhaustive sweeps over short strings reuse every prefix pair."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(levenshtein_memo(a[:-1], b) + 1, levenshtein_memo(a, b[:-1]) + 1,
               levenshtein_memo(a[:-1], b[:-1]) + (a[-1] != b[-1]))
