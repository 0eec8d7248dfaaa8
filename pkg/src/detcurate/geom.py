"""Box overlap and per-image matching of detections to ground truth.

Matching follows the standard greedy protocol: detections are visited in
descending confidence (ties keep input order) and each one claims the
still-unmatched ground truth with the highest IoU at or above the
threshold (IoU ties go to the lowest ground-truth index).  Matched
detections are true positives, the rest false positives; ground truths
left unclaimed are false negatives.
"""

from __future__ import annotations

from dataclasses import dataclass

from .anno import BoundingBox, Detection


@dataclass(frozen=True)
class MatchResult:
    """TP/FP/FN counts plus the per-detection verdicts of one matching run.

    ``pairs`` holds (detection index, ground-truth index, iou) using the
    original input positions; ``order`` lists detection indices in the
    processing (descending-confidence) order and ``flags`` marks each of
    them True for TP, aligned with ``order``.
    """

    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int, float], ...]
    order: tuple[int, ...]
    flags: tuple[bool, ...]


@dataclass(frozen=True)
class PrecisionRecall:
    """Precision/recall with explicit None for undefined (0/0) values."""

    precision: float | None
    recall: float | None


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area, in [0, 1].

    All areas derive from the corner coordinates with the same arithmetic
    as the intersection, which keeps the ratio in [0, 1] bitwise and makes
    iou(a, a) exactly 1 even when x + w rounds.
    """
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    return inter / (area_a + area_b - inter)


def match_image(
    gts: list[BoundingBox],
    dets: list[tuple[BoundingBox, float]],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedily match detections of one image (single class) to ground truth."""
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError("iou_threshold must be in (0, 1]")
    order = sorted(range(len(dets)), key=lambda i: -dets[i][1])
    taken = [False] * len(gts)
    pairs: list[tuple[int, int, float]] = []
    flags: list[bool] = []
    for di in order:
        box = dets[di][0]
        best_gi = -1
        best = 0.0
        for gi, gt in enumerate(gts):
            if taken[gi]:
                continue
            v = iou(box, gt)
            if v >= iou_threshold and v > best:
                best = v
                best_gi = gi
        if best_gi >= 0:
            taken[best_gi] = True
            pairs.append((di, best_gi, best))
            flags.append(True)
        else:
            flags.append(False)
    tp = len(pairs)
    return MatchResult(
        tp=tp,
        fp=len(dets) - tp,
        fn=len(gts) - tp,
        pairs=tuple(pairs),
        order=tuple(order),
        flags=tuple(flags),
    )


def match_image_classwise(
    gts: list[tuple[BoundingBox, int]],
    dets: list[Detection],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Match one image across classes: detections only pair with ground
    truths of their own category.  Counts are summed over classes; pair and
    order indices refer to the original input positions."""
    classes = {c for _b, c in gts} | {d.category_id for d in dets}
    tp = fp = fn = 0
    pairs: list[tuple[int, int, float]] = []
    ranked: list[tuple[float, int, bool]] = []
    for cat in classes:
        gt_idx = [i for i, (_b, c) in enumerate(gts) if c == cat]
        det_idx = [i for i, d in enumerate(dets) if d.category_id == cat]
        m = match_image(
            [gts[i][0] for i in gt_idx],
            [(dets[i].box, dets[i].confidence) for i in det_idx],
            iou_threshold,
        )
        tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn
        pairs.extend((det_idx[di], gt_idx[gi], v) for di, gi, v in m.pairs)
        ranked.extend(
            (dets[det_idx[di]].confidence, det_idx[di], flag)
            for di, flag in zip(m.order, m.flags)
        )
    ranked.sort(key=lambda t: (-t[0], t[1]))
    return MatchResult(
        tp=tp,
        fp=fp,
        fn=fn,
        pairs=tuple(pairs),
        order=tuple(di for _c, di, _f in ranked),
        flags=tuple(f for _c, _di, f in ranked),
    )


def precision_recall(m: MatchResult) -> PrecisionRecall:
    """tp/(tp+fp) and tp/(tp+fn); a zero denominator yields None."""
    prec = m.tp / (m.tp + m.fp) if m.tp + m.fp > 0 else None
    rec = m.tp / (m.tp + m.fn) if m.tp + m.fn > 0 else None
    return PrecisionRecall(precision=prec, recall=rec)
