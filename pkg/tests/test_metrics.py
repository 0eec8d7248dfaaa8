"""Metrics tests.

The reference oracle here is deliberately independent of the library path:
it re-runs a from-scratch greedy matcher at every distinct confidence
threshold, collects (recall, precision) points, and integrates the
max-precision envelope over the distinct recall breakpoints.  Library and
oracle must agree exactly on instances with distinct confidences.
"""

import numpy as np
import pytest
from oracles import (grid_dataset, hit, miss, oracle_class_ap, oracle_map,
                     random_eval_instance)

from detcurate.anno import Detection
from detcurate.metrics import (
    EvalReport,
    PrCurve,
    average_precision,
    coco_style_map,
    evaluate,
    pr_curve,
    report_from_dict,
    report_to_dict,
)


# --- pr_curve ----------------------------------------------------------------

def test_pr_curve_single_perfect():
    ds = grid_dataset(n_images=1)
    curve = pr_curve([hit(ds, 0, 1, 0, 0.8)], ds)
    assert curve.points == ((1.0, 1.0, 0.8),)


def test_pr_curve_hand_counted():
    # (0.9, TP), (0.8, FP), (0.7, TP) against 2 ground truths
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), miss(0, 1, 0.8), hit(ds, 1, 1, 0, 0.7)]
    curve = pr_curve(dets, ds)
    assert curve.points == ((0.5, 1.0, 0.9), (0.5, 0.5, 0.8), (1.0, 2 / 3, 0.7))


def test_pr_curve_empty_dets():
    ds = grid_dataset()
    curve = pr_curve([], ds, category_id=1)
    assert curve.points == ()


def test_pr_curve_rejects_unknown_class():
    ds = grid_dataset()
    with pytest.raises(ValueError, match="absent"):
        pr_curve([miss(0, 7, 0.5)], ds)


def test_pr_curve_recall_non_decreasing():
    rng = np.random.default_rng(0)
    ds = grid_dataset(n_images=3)
    dets = [
        (hit(ds, i % 3, 1, 0, float(c)) if c > 0.5 else miss(i % 3, 1, float(c)))
        for i, c in enumerate(rng.random(12))
    ]
    recalls = [r for r, _p, _c in pr_curve(dets, ds).points]
    assert recalls == sorted(recalls)


# --- average_precision -------------------------------------------------------

def test_ap_hand_value():
    curve = PrCurve(1, ((0.5, 1.0, 0.9), (0.5, 0.5, 0.8), (1.0, 2 / 3, 0.7)), 2)
    expected = 0.5 * 1.0 + 0.5 * (2 / 3)  # 5/6, also confirmed by the oracle below
    assert average_precision(curve) == pytest.approx(expected, abs=1e-15)
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), miss(0, 1, 0.8), hit(ds, 1, 1, 0, 0.7)]
    assert oracle_class_ap(dets, ds, 1) == pytest.approx(expected, abs=1e-15)


def test_ap_perfect_and_zero():
    assert average_precision(PrCurve(1, ((0.5, 1.0, 0.9), (1.0, 1.0, 0.8)), 2)) == 1.0
    assert average_precision(PrCurve(1, ((0.0, 0.0, 0.9), (0.0, 0.0, 0.8)), 2)) == 0.0
    assert average_precision(PrCurve(1, (), 2)) == 0.0


def test_ap_confidence_rescaling_invariant():
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), miss(0, 1, 0.8), hit(ds, 1, 1, 0, 0.7)]
    base = average_precision(pr_curve(dets, ds))
    for s in (0.5, 0.25, 0.0625):  # powers of two keep the order exactly
        scaled = [
            Detection(d.image_id, d.category_id, d.box, d.confidence * s) for d in dets
        ]
        assert average_precision(pr_curve(scaled, ds)) == base


def test_ap_trailing_fp_never_increases():
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), hit(ds, 1, 1, 0, 0.7)]
    base = average_precision(pr_curve(dets, ds))
    with_fp = dets + [miss(0, 1, 0.05)]
    assert average_precision(pr_curve(with_fp, ds)) <= base


def test_envelope_non_increasing():
    rng = np.random.default_rng(3)
    ds = grid_dataset(n_images=4)
    dets = []
    for i, c in enumerate(np.unique(rng.random(20))):
        dets.append(hit(ds, i % 4, 1, 0, float(c)) if i % 3 else miss(i % 4, 1, float(c)))
    pts = pr_curve(dets, ds).points
    envelope = []
    best = 0.0
    for r, p, _c in reversed(pts):
        best = max(best, p)
        envelope.append(best)
    assert envelope == sorted(envelope)


# --- evaluate ----------------------------------------------------------------

def test_evaluate_matches_oracle_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        ds, dets = random_eval_instance(rng)
        report = evaluate(dets, ds)
        assert report.mean_ap == pytest.approx(oracle_map(dets, ds), abs=1e-12)


def test_f1_two_decimal_values():
    # 871/1675 = 0.52 precision and 871/1300 = 0.67 recall exactly
    report = EvalReport({1: 0.5}, 0.5, 0.52, 0.67, 2 * 0.52 * 0.67 / 1.19, 871, 804, 429, 0.5, 0.5)
    assert f"{report.f1:.2f}" == "0.59"
    report2 = EvalReport({1: 0.5}, 0.5, 0.57, 0.65, 2 * 0.57 * 0.65 / 1.22, 741, 559, 399, 0.5, 0.5)
    assert f"{report2.f1:.2f}" == "0.61"


def test_evaluate_f1_undefined_when_nothing_scores():
    ds = grid_dataset(n_images=1)
    report = evaluate([miss(0, 1, 0.3)], ds)  # below the 0.5 cut
    assert report.tp == 0 and report.fp == 0
    assert report.precision_at_cut == 0.0 and report.recall_at_cut == 0.0
    assert report.f1 is None


def test_evaluate_counts_and_cut():
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), miss(0, 1, 0.6), hit(ds, 1, 1, 0, 0.4)]
    report = evaluate(dets, ds)
    # the 0.4 hit is below the cut: 1 TP, 1 FP, 1 missed ground truth
    assert (report.tp, report.fp, report.fn) == (1, 1, 1)
    assert report.precision_at_cut == 0.5
    assert report.recall_at_cut == 0.5
    assert report.f1 == pytest.approx(0.5)


def test_evaluate_class_without_detections_scores_zero():
    ds = grid_dataset(n_images=1, categories=(1, 2))
    report = evaluate([hit(ds, 0, 1, 0, 0.9)], ds)
    assert report.per_class_ap[2] == 0.0
    assert report.mean_ap == pytest.approx(0.5)


def test_report_round_trip_and_rounding():
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), miss(0, 1, 0.8), hit(ds, 1, 1, 0, 0.7)]
    report = evaluate(dets, ds)
    payload = report_to_dict(report)
    again = report_from_dict(payload)
    assert report_to_dict(again) == payload
    assert payload["map"] == pytest.approx(5 / 6, abs=1e-6)


def test_coco_style_map_bounds():
    ds = grid_dataset(n_images=2)
    dets = [hit(ds, 0, 1, 0, 0.9), hit(ds, 1, 1, 0, 0.7)]
    v = coco_style_map(dets, ds)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(1.0)  # exact-overlap hits survive every threshold
