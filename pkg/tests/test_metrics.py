import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from baformer.data import Segment, labels_to_segments
from baformer.metrics import edit_score, evaluate_run, f1_at, f1_counts, frame_accuracy, transcript
from oracles import levenshtein_reference

A, B, C = 0, 1, 2


def test_frame_accuracy():
    assert frame_accuracy([A, B, C], [A, B, C]) == 100.0
    assert frame_accuracy([A, A, B, B], [A, B, B, B]) == 75.0
    assert frame_accuracy([A, A], [B, B]) == 0.0
    with pytest.raises(ValueError):
        frame_accuracy([A], [A, B])


def test_edit_examples():
    assert edit_score([A, B, C], [A, B, C]) == 100.0
    assert edit_score([A, B, A], [A, B]) == pytest.approx(100 * (1 - 1 / 3))
    assert edit_score([], [A, B, C]) == 0.0
    assert edit_score([], []) == 100.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=12), st.lists(st.integers(0, 3), max_size=12))
def test_edit_matches_memoised_reference(a, b):
    longest = max(len(a), len(b))
    expect = 100.0 if longest == 0 else 100 * (1 - levenshtein_reference(a, b) / longest)
    assert edit_score(a, b) == pytest.approx(expect, abs=1e-12)


class TestF1:
    def test_identical(self):
        segs = labels_to_segments([A] * 4 + [B] * 3 + [A] * 2)
        for tau in (0.1, 0.25, 0.5, 1.0):
            assert f1_at(segs, segs, tau) == 100.0

    def test_shifted_boundary(self):
        gt = [Segment(A, 1, 10), Segment(B, 11, 20)]
        pred = [Segment(A, 1, 8), Segment(B, 9, 20)]
        assert f1_counts(pred, gt, 0.5) == (2, 0, 0)
        assert f1_at(pred, gt, 0.5) == 100.0

    def test_all_false_positives(self):
        gt = [Segment(A, 1, 10)]
        pred = [Segment(A, 1, 4), Segment(C, 5, 20)]
        assert f1_counts(pred, gt, 0.5) == (0, 2, 1)
        assert f1_at(pred, gt, 0.5) == 0.0

    def test_each_ground_truth_used_once(self):
        gt = [Segment(A, 1, 10)]
        pred = [Segment(A, 1, 5), Segment(B, 6, 6), Segment(A, 7, 10)]
        assert f1_counts(pred, gt, 0.1) == (1, 2, 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 2), min_size=1, max_size=40), st.data())
    def test_properties(self, gt_labels, data):
        pred_labels = data.draw(st.lists(st.integers(0, 2), min_size=len(gt_labels), max_size=len(gt_labels)))
        ps, gs = labels_to_segments(pred_labels), labels_to_segments(gt_labels)
        scores = [f1_at(ps, gs, t) for t in (0.1, 0.25, 0.5, 0.75)]
        assert all(0 <= s <= 100 for s in scores)
        assert all(x >= y for x, y in zip(scores, scores[1:]))
        for tau in (0.1, 0.5):
            tp, fp, fn = f1_counts(ps, gs, tau)
            assert tp + fn == len(gs) and tp + fp == len(ps)


class TestEvaluateRun:
    def test_single_video_matches_per_video(self):
        gt = np.array([A] * 5 + [B] * 5)
        pred = np.array([A] * 4 + [B] * 6)
        report = evaluate_run({"v": pred}, {"v": gt})
        assert report.accuracy == frame_accuracy(pred, gt)
        assert report.edit == edit_score(transcript(pred), transcript(gt))
        assert report.f1["0.50"] == f1_at(labels_to_segments(pred), labels_to_segments(gt), 0.5)
        assert set(report.to_dict()) == {"accuracy", "edit", "f1", "videos"}

    def test_duplicate_videos_same_as_one(self):
        gt = np.array([A] * 3 + [C] * 4)
        pred = np.array([A] * 2 + [C] * 5)
        one = evaluate_run({"v": pred}, {"v": gt})
        two = evaluate_run({"v": pred, "w": pred}, {"v": gt, "w": gt})
        assert (one.accuracy, one.edit, one.f1) == pytest.approx((two.accuracy, two.edit, two.f1))

    def test_mixed_aggregation(self):
        # perfect video: 10 frames, 2 segments.  Bad video: 20 frames of A vs
        # ground truth B then C (10 + 10), no overlap in class at all.
        gt = {"good": np.array([A] * 5 + [B] * 5), "bad": np.array([B] * 10 + [C] * 10)}
        pred = {"good": gt["good"].copy(), "bad": np.array([A] * 20)}
        report = evaluate_run(pred, gt)
        # accuracy: 10 correct of 30 frames
        assert report.accuracy == pytest.approx(100 * 10 / 30)
        # edit: mean of 100 and 100 * (1 - 2/2) = 0
        assert report.edit == pytest.approx(50.0)
        # pooled counts: TP 2, FP 1, FN 2 -> 2*2 / (4 + 1 + 2)
        for key in ("0.10", "0.25", "0.50"):
            assert report.f1[key] == pytest.approx(100 * 4 / 7)

    def test_order_invariant_and_bounded(self):
        rng = np.random.default_rng(0)
        gt = {f"v{i}": rng.integers(0, 3, size=30) for i in range(4)}
        pred = {k: rng.integers(0, 3, size=30) for k in gt}
        a = evaluate_run(pred, gt)
        b = evaluate_run(dict(reversed(list(pred.items()))), dict(reversed(list(gt.items()))))
        assert a.to_dict() == b.to_dict()
        assert all(0 <= x <= 100 for x in [a.accuracy, a.edit, *a.f1.values()])

    def test_missing_video(self):
        with pytest.raises(KeyError):
            evaluate_run({"a": np.zeros(3)}, {"b": np.zeros(3)})
