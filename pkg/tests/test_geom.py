import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detcurate.anno import BoundingBox, Detection
from detcurate.geom import iou, match_image, match_image_classwise, precision_recall

boxes = st.builds(
    BoundingBox,
    x=st.floats(-50, 50, allow_nan=False),
    y=st.floats(-50, 50, allow_nan=False),
    w=st.floats(0.1, 100, allow_nan=False),
    h=st.floats(0.1, 100, allow_nan=False),
)


def test_iou_identical():
    b = BoundingBox(3, 4, 10, 12)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(BoundingBox(0, 0, 5, 5), BoundingBox(10, 10, 5, 5)) == 0.0


def test_iou_corner_overlap():
    # intersection 1, union 4 + 4 - 1 = 7
    a, b = BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2)
    assert iou(a, b) == pytest.approx(1 / 7, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(a=boxes, b=boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert iou(b, a) == v
    assert 0.0 <= v <= 1.0


@settings(max_examples=100, deadline=None)
@given(a=boxes, b=boxes, s=st.floats(0.01, 100, allow_nan=False))
def test_iou_scale_invariant(a, b, s):
    assert iou(a.scaled(s), b.scaled(s)) == pytest.approx(iou(a, b), abs=1e-12)


def test_match_single_perfect():
    gt = [BoundingBox(0, 0, 10, 10)]
    det = [(BoundingBox(1, 1, 10, 10), 0.9)]
    assert iou(gt[0], det[0][0]) > 0.5
    m = match_image(gt, det)
    assert (m.tp, m.fp, m.fn) == (1, 0, 0)


def test_match_one_hit_one_stray():
    gts = [BoundingBox(0, 0, 10, 10), BoundingBox(50, 50, 10, 10)]
    dets = [(BoundingBox(1, 1, 10, 10), 0.8), (BoundingBox(80, 80, 5, 5), 0.7)]
    m = match_image(gts, dets)
    assert (m.tp, m.fp, m.fn) == (1, 1, 1)
    pr = precision_recall(m)
    assert pr.precision == 0.5


def test_match_duplicate_detections_single_gt():
    gt = [BoundingBox(0, 0, 10, 10)]
    dets = [(BoundingBox(0, 0, 10, 11), 0.6), (BoundingBox(1, 0, 10, 10), 0.9)]
    m = match_image(gt, dets)
    # higher-confidence detection claims the ground truth, the other is FP
    assert (m.tp, m.fp, m.fn) == (1, 1, 0)
    assert m.pairs[0][0] == 1
    # brute force over one-to-one assignments agrees on this instance
    assert _best_assignment_tp(gt, [d[0] for d in dets], 0.5) == 1


def test_match_threshold_validation():
    with pytest.raises(ValueError):
        match_image([], [], 0.0)


def test_precision_recall_paper_cases():
    fp_case = match_image(
        [BoundingBox(0, 0, 10, 10)],
        [(BoundingBox(0, 0, 10, 10), 0.9), (BoundingBox(40, 40, 10, 10), 0.8)],
    )
    pr = precision_recall(fp_case)
    assert (pr.precision, pr.recall) == (0.5, 1.0)

    fn_case = match_image(
        [BoundingBox(0, 0, 10, 10), BoundingBox(40, 40, 10, 10)],
        [(BoundingBox(0, 0, 10, 10), 0.9)],
    )
    pr = precision_recall(fn_case)
    assert (pr.precision, pr.recall) == (1.0, 0.5)


def test_precision_recall_empty_undefined():
    m = match_image([], [])
    pr = precision_recall(m)
    assert pr.precision is None and pr.recall is None


def _random_instance(rng, max_boxes=6):
    def rand_boxes(n):
        out = []
        for _ in range(n):
            x, y = rng.uniform(0, 80, 2)
            w, h = rng.uniform(2, 30, 2)
            out.append(BoundingBox(float(x), float(y), float(w), float(h)))
        return out

    gts = rand_boxes(rng.integers(0, max_boxes + 1))
    dets = [(b, float(rng.random())) for b in rand_boxes(rng.integers(0, max_boxes + 1))]
    return gts, dets


def test_conservation_over_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        gts, dets = _random_instance(rng)
        m = match_image(gts, dets)
        assert m.tp + m.fn == len(gts)
        assert m.tp + m.fp == len(dets)
        assert len({gi for _di, gi, _v in m.pairs}) == len(m.pairs)


def _best_assignment_tp(gts, det_boxes, threshold):
    """Maximum-cardinality matching by brute force over assignments."""
    n = len(det_boxes)
    best = 0
    for perm in itertools.permutations(range(len(gts) + n), n):
        # positions >= len(gts) mean "unmatched"
        used = set()
        tp = 0
        ok = True
        for di, gi in enumerate(perm):
            if gi >= len(gts):
                continue
            if gi in used:
                ok = False
                break
            used.add(gi)
            if iou(det_boxes[di], gts[gi]) >= threshold:
                tp += 1
        if ok:
            best = max(best, tp)
    return best


def test_greedy_matches_bruteforce_on_small_distinct_instances():
    # fixed-seed distributional check: with all pairwise IoUs distinct,
    # greedy and exhaustive matching agree on these instances
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 60:
        gts, dets = _random_instance(rng, max_boxes=4)
        if not gts or not dets:
            continue
        ious = [iou(d[0], g) for d in dets for g in gts]
        positive = [v for v in ious if v > 0]
        if len(set(ious)) != len(ious) or not positive:
            continue
        m = match_image(gts, dets)
        assert m.tp == _best_assignment_tp(gts, [d[0] for d in dets], 0.5)
        checked += 1


def test_classwise_matching_respects_categories():
    gts = [(BoundingBox(0, 0, 10, 10), 1), (BoundingBox(40, 40, 10, 10), 2)]
    dets = [
        Detection("im", 2, BoundingBox(0, 0, 10, 10), 0.9),  # right place, wrong class
        Detection("im", 1, BoundingBox(0, 0, 10, 10), 0.8),
    ]
    m = match_image_classwise(gts, dets)
    assert (m.tp, m.fp, m.fn) == (1, 1, 1)
    assert m.order[0] == 0 and m.flags[0] is False
