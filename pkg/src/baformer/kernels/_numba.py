"""Loop kernels compiled with numba.

Every function here has a twin with the same name and contract in
``_numpy``; ``baformer.kernels`` picks one of the two at import time.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def hungarian(cost):
    n, m = cost.shape
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            assignment[p[j] - 1] = j - 1
    return assignment


@njit(cache=True, nogil=True)
def levenshtein(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
            best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            if sub < best:
                best = sub
            cur[j] = best
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


@njit(cache=True, nogil=True)
def span_winners(pm, starts, ends):
    n_spans = starts.shape[0]
    n_queries = pm.shape[0]
    out = np.empty(n_spans, dtype=np.int64)
    for s in range(n_spans):
        best = -np.inf
        k = 0
        for j in range(n_queries):
            w = 0.0
            for t in range(starts[s], ends[s]):
                w += pm[j, t]
            if w > best:
                best = w
                k = j
        out[s] = k
    return out


@njit(cache=True, nogil=True)
def span_majority(labels, starts, ends, n_classes):
    n_spans = starts.shape[0]
    out = np.empty(n_spans, dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.int64)
    for s in range(n_spans):
        counts[:] = 0
        for t in range(starts[s], ends[s]):
            counts[labels[t]] += 1
        best = -1
        k = 0
        for c in range(n_classes):
            if counts[c] > best:
                best = counts[c]
                k = c
        out[s] = k
    return out


@njit(cache=True, nogil=True)
def peak_indices(pb, min_prob):
    T = pb.shape[0]
    buf = np.empty(T, dtype=np.int64)
    n = 0
    for i in range(1, T - 1):
        if pb[i] > pb[i - 1] and pb[i] > pb[i + 1] and pb[i] >= min_prob:
            buf[n] = i
            n += 1
    return buf[:n].copy()


@njit(cache=True, nogil=True)
def nms_indices(pb, window, min_prob):
    T = pb.shape[0]
    alive = np.ones(T, dtype=np.bool_)
    buf = np.empty(T, dtype=np.int64)
    n = 0
    while True:
        best = -np.inf
        k = -1
        for t in range(T):
            if alive[t] and pb[t] > best:
                best = pb[t]
                k = t
        if k < 0 or best < min_prob:
            break
        buf[n] = k
        n += 1
        lo = max(0, k - window)
        hi = min(T, k + window + 1)
        for t in range(lo, hi):
            alive[t] = False
    return np.sort(buf[:n])


@njit(cache=True, nogil=True)
def f1_counts(p_cls, p_start, p_end, g_cls, g_start, g_end, tau):
    n_gt = g_cls.shape[0]
    used = np.zeros(n_gt, dtype=np.bool_)
    tp = 0
    fp = 0
    for i in range(p_cls.shape[0]):
        best = -1.0
        k = -1
        for j in range(n_gt):
            if used[j] or g_cls[j] != p_cls[i]:
                continue
            inter = min(p_end[i], g_end[j]) - max(p_start[i], g_start[j]) + 1
            if inter < 0:
                inter = 0
            union = (p_end[i] - p_start[i] + 1) + (g_end[j] - g_start[j] + 1) - inter
            iou = inter / union
            if iou > best:
                best = iou
                k = j
        if k >= 0 and best >= tau:
            tp += 1
            used[k] = True
        else:
            fp += 1
    return tp, fp, n_gt - tp
