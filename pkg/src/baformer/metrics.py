"""Frame accuracy, segmental edit score and F1@IoU."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import labels_to_segments

DEFAULT_THRESHOLDS = (0.10, 0.25, 0.50)


def frame_accuracy(pred, gt) -> float:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {gt.shape}")
    if pred.size == 0:
        return 100.0
    return 100.0 * float(np.mean(pred == gt))


def transcript(labels) -> list:
    if len(labels) == 0:
        return []
    return [s.label for s in labels_to_segments(labels)]


def edit_score(pred_transcript, gt_transcript) -> float:
    a = np.asarray(pred_transcript, dtype=np.int64)
    b = np.asarray(gt_transcript, dtype=np.int64)
    longest = max(len(a), len(b))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - kernels.levenshtein(a, b) / longest)


def _seg_arrays(segments):
    return (
        np.array([s.label for s in segments], dtype=np.int64),
        np.array([s.start for s in segments], dtype=np.int64),
        np.array([s.end for s in segments], dtype=np.int64),
    )


def f1_counts(pred_segments, gt_segments, tau: float):
    """``(tp, fp, fn)`` under greedy one-to-one IoU matching."""
    tp, fp, fn = kernels.f1_counts(*_seg_arrays(pred_segments), *_seg_arrays(gt_segments), float(tau))
    return int(tp), int(fp), int(fn)


def f1_from_counts(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 100.0 * 2 * tp / denom


def f1_at(pred_segments, gt_segments, tau: float) -> float:
    return f1_from_counts(*f1_counts(pred_segments, gt_segments, tau))


def _tkey(tau) -> str:
    return f"{tau:.2f}"


@dataclass
class EvalReport:
    accuracy: float
    edit: float
    f1: dict
    videos: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "edit": self.edit, "f1": dict(self.f1), "videos": list(self.videos)}


def video_metrics(pred, gt, thresholds=DEFAULT_THRESHOLDS) -> dict:
    pred, gt = np.asarray(pred), np.asarray(gt)
    ps, gs = labels_to_segments(pred), labels_to_segments(gt)
    counts = {_tkey(t): f1_counts(ps, gs, t) for t in thresholds}
    return {
        "accuracy": frame_accuracy(pred, gt),
        "correct": int(np.sum(pred == gt)),
        "frames": int(len(gt)),
        "edit": edit_score([s.label for s in ps], [s.label for s in gs]),
        "f1": {k: f1_from_counts(*c) for k, c in counts.items()},
        "counts": {k: list(c) for k, c in counts.items()},
    }


def evaluate_run(predictions: dict, ground_truth: dict, thresholds=DEFAULT_THRESHOLDS) -> EvalReport:
    """Micro accuracy, mean edit, F1 from TP/FP/FN pooled over videos."""
    missing = set(ground_truth) ^ set(predictions)
    if missing:
        raise KeyError(f"video sets differ: {sorted(missing)}")
    if not ground_truth:
        raise ValueError("no videos to evaluate")
    per_video = []
    pooled = {_tkey(t): np.zeros(3, dtype=np.int64) for t in thresholds}
    correct = frames = 0
    for vid in sorted(ground_truth):
        m = video_metrics(predictions[vid], ground_truth[vid], thresholds)
        correct += m["correct"]
        frames += m["frames"]
        for k in pooled:
            pooled[k] += np.array(m["counts"][k])
        per_video.append({"video_id": vid, **{k: m[k] for k in ("accuracy", "edit", "f1")}})
    return EvalReport(
        accuracy=100.0 * correct / frames,
        edit=float(np.mean([v["edit"] for v in per_video])),
        f1={k: f1_from_counts(*c) for k, c in pooled.items()},
        videos=per_video,
    )
