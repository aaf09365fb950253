"""Boundary extraction and the three decoding procedures.

Boundary sets hold sorted 1-based frame indices that always include 1 and T.
Consecutive boundaries delimit proposals ``[b_i, b_{i+1})``; the final
proposal also covers frame T.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ShapeError

BOUNDARY_MODES = ("peak", "nms")


def _validate_boundaries(B, T):
    B = np.asarray(B, dtype=np.int64)
    if B.ndim != 1 or len(B) == 0 or B[0] != 1 or B[-1] != T:
        raise ShapeError("boundaries", f"must start at 1 and end at T={T}, got {B.tolist()[:6]}")
    if len(B) > 1 and np.any(np.diff(B) <= 0):
        raise ShapeError("boundaries", "must be strictly increasing")
    return B


def with_endpoints(interior, T: int) -> np.ndarray:
    """Union 1-based ``interior`` frames with {1, T} and sort."""
    return np.unique(np.concatenate([[1, T], np.asarray(interior, dtype=np.int64)])).astype(np.int64)


def extract_boundaries(pb, mode: str = "peak", nms_window: int = 8, min_prob: float | None = None) -> np.ndarray:
    """Boundary set from a per-frame boundary probability vector.

    ``min_prob`` defaults to 0.0 for peak mode and 0.05 for nms mode.
    """
    pb = np.ascontiguousarray(np.asarray(pb, dtype=np.float64).reshape(-1))
    T = len(pb)
    if T < 1:
        raise ShapeError("extract_boundaries", "empty boundary vector")
    if mode == "peak":
        idx = kernels.peak_indices(pb, 0.0 if min_prob is None else float(min_prob))
    elif mode == "nms":
        idx = kernels.nms_indices(pb, int(nms_window), 0.05 if min_prob is None else float(min_prob))
    else:
        raise ValueError(f"unknown boundary mode {mode!r}")
    return with_endpoints(idx + 1, T)


def spans(B, T: int):
    """0-based ``(starts, ends)`` (end exclusive) covering all T frames."""
    B = _validate_boundaries(B, T)
    starts = B[:-1] - 1 if len(B) > 1 else np.array([0], dtype=np.int64)
    ends = np.append(starts[1:], T).astype(np.int64)
    return np.ascontiguousarray(starts), ends


def _check(pc, pm):
    pc = np.asarray(pc, dtype=np.float64)
    pm = np.ascontiguousarray(np.asarray(pm, dtype=np.float64))
    if pc.ndim != 2 or pm.ndim != 2 or pc.shape[0] != pm.shape[0] or pc.shape[1] < 2:
        raise ShapeError("voting", f"class probs {pc.shape} vs masks {pm.shape}")
    return pc, pm


def query_classes(pc) -> np.ndarray:
    """Per-query action class with the no-action column excluded."""
    return np.argmax(pc[:, :-1], axis=1)


def query_vote(pc, pm, B) -> np.ndarray:
    """Label each proposal with the class of the query holding most mask mass there."""
    pc, pm = _check(pc, pm)
    T = pm.shape[1]
    starts, ends = spans(B, T)
    cls = query_classes(pc)
    winners = kernels.span_winners(pm, starts, ends)
    return np.repeat(cls[winners], ends - starts)


def frame_scores(pc, pm) -> np.ndarray:
    """T x K per-frame class scores: masks weighted by action probabilities."""
    pc, pm = _check(pc, pm)
    return pm.T @ pc[:, :-1]


def frame_argmax(pc, pm) -> np.ndarray:
    return np.argmax(frame_scores(pc, pm), axis=1)


def frame_vote(pc, pm, B) -> np.ndarray:
    """Label each proposal with the majority frame-wise argmax inside it."""
    pc, pm = _check(pc, pm)
    T = pm.shape[1]
    starts, ends = spans(B, T)
    s0 = np.ascontiguousarray(frame_argmax(pc, pm))
    winners = kernels.span_majority(s0, starts, ends, pc.shape[1] - 1)
    return np.repeat(winners, ends - starts)
