"""Vectorised numpy twins of the numba kernels (same names, same results)."""

import numpy as np


def hungarian(cost):
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0 - 1] - u[i0] - v[1:]
            upd = free[1:] & (cur < minv[1:])
            minv[1:][upd] = cur[upd]
            way[1:][upd] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assignment = np.full(n, -1, dtype=np.int64)
    cols = np.nonzero(p[1:])[0]
    assignment[p[1:][cols] - 1] = cols
    return assignment


def levenshtein(a, b):
    m = len(b)
    b = np.asarray(b)
    ramp = np.arange(m + 1)
    prev = ramp.copy()
    for i in range(1, len(a) + 1):
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]))
        # insertions chain left to right: cur[j] = min_k (cand[k] + j - k)
        prev = np.minimum.accumulate(cand - ramp) + ramp
    return int(prev[m])


def span_winners(pm, starts, ends):
    if pm.shape[1] == 0 or len(starts) == 0:
        return np.zeros(len(starts), dtype=np.int64)
    mass = np.add.reduceat(pm, starts, axis=1)
    return np.argmax(mass, axis=0).astype(np.int64)


def span_majority(labels, starts, ends, n_classes):
    onehot = np.zeros((len(labels), n_classes), dtype=np.int64)
    onehot[np.arange(len(labels)), labels] = 1
    counts = np.add.reduceat(onehot, starts, axis=0)
    return np.argmax(counts, axis=1).astype(np.int64)


def peak_indices(pb, min_prob):
    if len(pb) < 3:
        return np.zeros(0, dtype=np.int64)
    mid = pb[1:-1]
    hit = (mid > pb[:-2]) & (mid > pb[2:]) & (mid >= min_prob)
    return np.nonzero(hit)[0].astype(np.int64) + 1


def nms_indices(pb, window, min_prob):
    score = np.array(pb, dtype=np.float64)
    picks = []
    while score.size:
        k = int(np.argmax(score))
        if not score[k] >= min_prob or score[k] == -np.inf:
            break
        picks.append(k)
        score[max(0, k - window):k + window + 1] = -np.inf
    return np.sort(np.array(picks, dtype=np.int64))


def f1_counts(p_cls, p_start, p_end, g_cls, g_start, g_end, tau):
    used = np.zeros(len(g_cls), dtype=bool)
    g_len = g_end - g_start + 1
    tp = fp = 0
    for c, s, e in zip(p_cls, p_start, p_end):
        inter = np.clip(np.minimum(e, g_end) - np.maximum(s, g_start) + 1, 0, None)
        iou = inter / ((e - s + 1) + g_len - inter)
        iou = np.where(used | (g_cls != c), -1.0, iou)
        k = int(np.argmax(iou)) if len(iou) else -1
        if k >= 0 and iou[k] >= 0 and iou[k] >= tau:
            tp += 1
            used[k] = True
        else:
            fp += 1
    return tp, fp, len(g_cls) - tp
