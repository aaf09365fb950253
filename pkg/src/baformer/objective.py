"""Query/ground-truth matching and the per-video training objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import numeric as nm
from .errors import ConfigError, MatchingError

PROB_CLAMP = 1e-7
STRATEGIES = ("instance", "transcript", "ordered_class")


@dataclass
class LossWeights:
    focal: float = 5.0
    dice: float = 1.0
    gamma: float = 2.0
    alpha: float = 0.25
    aux_weight: float = 1.0
    dice_eps: float = 1.0
    per_layer_matching: bool = True

    def validate(self):
        for name in ("focal", "dice", "gamma", "alpha", "aux_weight", "dice_eps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss.{name} must be nonnegative")
        if self.alpha > 1:
            raise ConfigError("loss.alpha must lie in [0, 1]")


@dataclass
class MatchAssignment:
    """``delta[j]`` is the query bound to target j; ``sigma[i]`` the class query i learns.

    Targets are segments (instance, transcript) or per-class masks
    (ordered_class).  Queries outside ``delta`` have ``sigma == K``.
    """

    strategy: str
    sigma: np.ndarray
    delta: np.ndarray
    target_classes: np.ndarray
    target_masks: np.ndarray


@dataclass
class LossBreakdown:
    total: nm.Tensor
    class_term: float
    mask_term: float
    boundary_term: float
    assignments: list = field(default_factory=list)


# ---------------------------------------------------------------- mask loss


def _clamp(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def pairwise_mask_cost(pred, target, weights: LossWeights) -> np.ndarray:
    """Mask loss between every prediction row and every binary target row."""
    P = _clamp(np.atleast_2d(pred))
    Y = np.atleast_2d(target).astype(np.float64)
    if P.shape[1] != Y.shape[1]:
        raise MatchingError(f"mask length mismatch: {P.shape[1]} vs {Y.shape[1]}")
    T = P.shape[1]
    g, a = weights.gamma, weights.alpha
    pos = a * (1.0 - P) ** g * -np.log(P)
    neg = (1.0 - a) * P ** g * -np.log(1.0 - P)
    focal = (pos @ Y.T + neg @ (1.0 - Y).T) / T
    inter = P @ Y.T
    dice = 1.0 - (2.0 * inter + weights.dice_eps) / (
        P.sum(axis=1)[:, None] + Y.sum(axis=1)[None, :] + weights.dice_eps
    )
    return weights.focal * focal + weights.dice * dice


def mask_loss(a, b, weights: LossWeights | None = None) -> float:
    """Weighted focal + dice loss between a probability vector and a binary one."""
    weights = weights or LossWeights()
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise MatchingError(f"mask length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(pairwise_mask_cost(a, b, weights)[0, 0])


def mask_loss_rows(pred: nm.Tensor, target: np.ndarray, weights: LossWeights) -> nm.Tensor:
    """Differentiable row-wise mask loss; returns an R x 1 column."""
    T = pred.shape[1]
    Y = np.asarray(target, dtype=np.float64)
    p = nm.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    p_t = nm.add(nm.hadamard(p, 2.0 * Y - 1.0), 1.0 - Y)
    alpha_t = weights.alpha * Y + (1.0 - weights.alpha) * (1.0 - Y)
    focal = nm.hadamard(nm.hadamard(nm.power(nm.scale(p_t, -1.0) + 1.0, weights.gamma), nm.log(p_t)), -alpha_t)
    focal = nm.scale(nm.row_sums(focal), 1.0 / T)
    inter = nm.row_sums(nm.hadamard(p, Y))
    denom = nm.add(nm.row_sums(p), Y.sum(axis=1, keepdims=True) + weights.dice_eps)
    ratio = nm.hadamard(nm.add(nm.scale(inter, 2.0), weights.dice_eps), nm.power(denom, -1.0))
    dice = nm.scale(ratio, -1.0) + 1.0
    return nm.add(nm.scale(focal, weights.focal), nm.scale(dice, weights.dice))


# ------------------------------------------------------------------ matching


def hungarian(cost) -> np.ndarray:
    """Minimum-cost injective assignment of ground truths (columns) to predictions (rows).

    Returns ``pred_for_gt`` with one prediction index per column.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise MatchingError("cost must be a matrix")
    n_pred, n_gt = cost.shape
    if n_gt > n_pred:
        raise MatchingError(f"hungarian: {n_gt} ground truths exceed {n_pred} predictions")
    if not np.isfinite(cost).all():
        raise MatchingError("hungarian: non-finite cost")
    if n_gt == 0:
        return np.zeros(0, dtype=np.int64)
    return kernels.hungarian(np.ascontiguousarray(cost.T))


def matching_cost(pc, pm, target_classes, target_masks, weights: LossWeights) -> np.ndarray:
    """Cost_ij = -log p^c_(i, y_j) + mask loss(p^m_i, y^m_j); M x N."""
    cls_cost = -np.log(np.maximum(pc[:, target_classes], 1e-300))
    return cls_cost + pairwise_mask_cost(pm, target_masks, weights)


def build_assignment(strategy, pc, pm, gt, weights: LossWeights | None = None) -> MatchAssignment:
    """Bind queries to targets under ``strategy`` for one layer's predictions."""
    weights = weights or LossWeights()
    pc = np.asarray(pc, dtype=np.float64)
    pm = np.asarray(pm, dtype=np.float64)
    M, K = pc.shape[0], pc.shape[1] - 1
    if strategy == "ordered_class":
        if M < K:
            raise MatchingError(f"ordered_class needs M >= K, got M={M}, K={K}")
        labels = gt.labels
        present = np.unique(labels)
        target_classes = present.astype(np.int64)
        target_masks = (labels[None, :] == present[:, None]).astype(np.float64)
        delta = target_classes.copy()
    else:
        target_classes = np.asarray(gt.transcript, dtype=np.int64)
        target_masks = gt.masks
        N = len(target_classes)
        if M < N:
            raise MatchingError(f"{strategy} needs M >= N, got M={M}, N={N}")
        if strategy == "transcript":
            delta = np.arange(N, dtype=np.int64)
        elif strategy == "instance":
            delta = hungarian(matching_cost(pc, pm, target_classes, target_masks, weights))
        else:
            raise MatchingError(f"unknown matching strategy {strategy!r}")
    if K <= target_classes.max(initial=-1):
        raise MatchingError(f"ground-truth class {target_classes.max()} outside model's {K} classes")
    sigma = np.full(M, K, dtype=np.int64)
    sigma[delta] = target_classes
    return MatchAssignment(strategy, sigma, delta, target_classes, target_masks)


# ---------------------------------------------------------------- the loss


def boundary_bce(pb: nm.Tensor, heatmap) -> nm.Tensor:
    y = np.asarray(heatmap, dtype=np.float64).reshape(1, -1)
    p = nm.clip(pb, PROB_CLAMP, 1.0 - PROB_CLAMP)
    one_minus = nm.scale(p, -1.0) + 1.0
    ll = nm.add(nm.hadamard(nm.log(p), y), nm.hadamard(nm.log(one_minus), 1.0 - y))
    return nm.scale(nm.total(ll), -1.0)


def boundary_floor(heatmap) -> float:
    """Smallest attainable boundary term (binary entropy of the soft target)."""
    y = _clamp(np.asarray(heatmap, dtype=np.float64))
    return float(-(y * np.log(y) + (1 - y) * np.log(1 - y)).sum())


def layer_loss(pc, pm, pb, gt, assignment: MatchAssignment, weights: LossWeights):
    M = pc.shape[0]
    cls = nm.scale(nm.total(nm.log(nm.clip(nm.pick(pc, np.arange(M), assignment.sigma), 1e-300, 1.0))), -1.0)
    if len(assignment.delta):
        mask = nm.total(mask_loss_rows(nm.rows(pm, assignment.delta), assignment.target_masks, weights))
    else:
        mask = nm.Tensor(0.0)
    bnd = boundary_bce(pb, gt.heatmap)
    return cls, mask, bnd


def video_loss(outputs, gt, strategy: str = "instance", weights: LossWeights | None = None) -> LossBreakdown:
    """Sum of per-layer losses; the last layer has weight 1, the rest ``aux_weight``."""
    weights = weights or LossWeights()
    if strategy not in STRATEGIES:
        raise MatchingError(f"unknown matching strategy {strategy!r}")
    L = outputs.num_layers
    shared = None
    if not weights.per_layer_matching:
        shared = build_assignment(strategy, outputs.class_probs[-1].data, outputs.mask_probs[-1].data, gt, weights)
    total = None
    terms = np.zeros(3)
    assignments = []
    for i in range(L):
        pc, pm, pb = outputs.class_probs[i], outputs.mask_probs[i], outputs.boundary_probs[i]
        assignment = shared or build_assignment(strategy, pc.data, pm.data, gt, weights)
        assignments.append(assignment)
        cls, mask, bnd = layer_loss(pc, pm, pb, gt, assignment, weights)
        w = 1.0 if i == L - 1 else weights.aux_weight
        layer_total = nm.scale(nm.add(nm.add(cls, mask), bnd), w)
        total = layer_total if total is None else nm.add(total, layer_total)
        terms += w * np.array([cls.item(), mask.item(), bnd.item()])
    return LossBreakdown(total, float(terms[0]), float(terms[1]), float(terms[2]), assignments)
