"""Dataset-level ranking metrics: PR curves, interpolated AP, mAP and F1.

Average precision integrates the interpolated precision envelope over the
recall axis: detections of one class are ranked by descending confidence,
one (recall, precision) point is emitted per rank, and each recall step is
weighted by the maximum precision achieved at that recall or beyond.  A
virtual point at recall 0 anchors the first step, so a lone perfect
detection scores AP 1 rather than 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ._util import round6
from .anno import Dataset, Detection
from .geom import match_image, match_image_classwise


@dataclass(frozen=True)
class PrCurve:
    """Per-class precision-recall points, one per detection rank."""

    category_id: int
    points: tuple[tuple[float, float, float], ...]  # (recall, precision, confidence)
    gt_count: int


@dataclass(frozen=True)
class EvalReport:
    """One detector run summarized: per-class AP, mAP, and PR/F1 at a cut.

    ``f1`` is None when precision + recall is zero (rendered as null in the
    JSON report); precision/recall are reported as 0.0 when their
    denominators are zero.
    """

    per_class_ap: dict[int, float]
    mean_ap: float
    precision_at_cut: float
    recall_at_cut: float
    f1: float | None
    tp: int
    fp: int
    fn: int
    iou_threshold: float
    confidence_cut: float


def _ranked_flags(dets: list[Detection], gt: Dataset, iou_threshold: float) -> list[bool]:
    """TP/FP flag per detection, globally ranked by descending confidence.

    Matching is per image; the global ranking is a stable sort, so equal
    confidences keep their input order.
    """
    by_image: dict[str, list[int]] = {}
    for i, d in enumerate(dets):
        if d.image_id not in gt:
            raise ValueError(f"detection references unknown image {d.image_id!r}")
        by_image.setdefault(d.image_id, []).append(i)

    flag_of: dict[int, bool] = {}
    for image_id, det_idx in by_image.items():
        cat = dets[det_idx[0]].category_id
        gts = [b for b, c in gt.image(image_id).annotations if c == cat]
        m = match_image(
            gts, [(dets[i].box, dets[i].confidence) for i in det_idx], iou_threshold
        )
        for local, flag in zip(m.order, m.flags):
            flag_of[det_idx[local]] = flag

    ranked = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    return [flag_of[i] for i in ranked]


def pr_curve(
    dets: list[Detection],
    gt: Dataset,
    iou_threshold: float = 0.5,
    category_id: int | None = None,
) -> PrCurve:
    """Cumulative PR points for all detections of one class.

    The class is inferred from the detections; pass ``category_id`` when
    the detection list is empty (the curve is then an empty point list).
    """
    cats = {d.category_id for d in dets}
    if len(cats) > 1:
        raise ValueError(f"pr_curve expects a single class, got {sorted(cats)}")
    if category_id is not None and cats and category_id not in cats:
        raise ValueError("category_id disagrees with the detections")
    if cats:
        (cat,) = cats
    elif category_id is not None:
        cat = category_id
    else:
        raise ValueError("empty detection list needs an explicit category_id")
    if cat not in gt.categories:
        raise ValueError(f"category {cat} absent from ground truth")
    gt_count = sum(1 for img in gt.images for _b, c in img.annotations if c == cat)
    if gt_count == 0:
        raise ValueError(f"category {cat} has no ground-truth instances")

    flags = _ranked_flags(dets, gt, iou_threshold)
    confs = sorted((d.confidence for d in dets), reverse=True)
    points = []
    tp = 0
    for rank, (flag, conf) in enumerate(zip(flags, confs), start=1):
        tp += flag
        points.append((tp / gt_count, tp / rank, conf))
    return PrCurve(category_id=cat, points=tuple(points), gt_count=gt_count)


def average_precision(curve: PrCurve) -> float:
    """Interpolated area under the PR curve; empty curve scores 0."""
    pts = curve.points
    if not pts:
        return 0.0
    n = len(pts)
    envelope = [0.0] * n  # max precision at this rank or any later one
    best = 0.0
    for i in range(n - 1, -1, -1):
        best = max(best, pts[i][1])
        envelope[i] = best
    ap = 0.0
    prev_recall = 0.0
    for i in range(n):
        recall = pts[i][0]
        if recall > prev_recall:
            ap += (recall - prev_recall) * envelope[i]
            prev_recall = recall
    return ap


def evaluate(
    dets: list[Detection],
    gt: Dataset,
    iou_threshold: float = 0.5,
    confidence_cut: float = 0.5,
) -> EvalReport:
    """Full run summary: mAP over classes with ground truth, plus
    precision/recall/F1 over detections with confidence >= confidence_cut.

    Classes present in the ground truth but never detected contribute an
    AP of 0; detected classes with no ground truth anywhere are excluded
    from mAP but still count as false positives at the cut.
    """
    classes = sorted(
        {c for img in gt.images for _b, c in img.annotations}
    )
    per_class: dict[int, float] = {}
    for cat in classes:
        class_dets = [d for d in dets if d.category_id == cat]
        curve = pr_curve(class_dets, gt, iou_threshold, category_id=cat)
        per_class[cat] = average_precision(curve)
    mean_ap = sum(per_class.values()) / len(per_class) if per_class else 0.0

    cut_dets = [d for d in dets if d.confidence >= confidence_cut]
    by_image: dict[str, list[Detection]] = {}
    for d in cut_dets:
        if d.image_id not in gt:
            raise ValueError(f"detection references unknown image {d.image_id!r}")
        by_image.setdefault(d.image_id, []).append(d)
    tp = fp = fn = 0
    for img in gt.images:
        m = match_image_classwise(
            list(img.annotations), by_image.get(img.image_id, []), iou_threshold
        )
        tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn

    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else None
    return EvalReport(
        per_class_ap=per_class,
        mean_ap=mean_ap,
        precision_at_cut=precision,
        recall_at_cut=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        fn=fn,
        iou_threshold=iou_threshold,
        confidence_cut=confidence_cut,
    )


def coco_style_map(
    dets: list[Detection], gt: Dataset, thresholds: tuple[float, ...] = tuple(
        round(0.5 + 0.05 * i, 2) for i in range(10)
    )
) -> float:
    """mAP averaged over an IoU-threshold sweep (optional extra, not used
    by the default report)."""
    if not thresholds:
        raise ValueError("need at least one threshold")
    return sum(evaluate(dets, gt, t).mean_ap for t in thresholds) / len(thresholds)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "precision": round6(report.precision_at_cut),
        "recall": round6(report.recall_at_cut),
        "f1": None if report.f1 is None else round6(report.f1),
        "map": round6(report.mean_ap),
        "per_class_ap": {str(c): round6(ap) for c, ap in report.per_class_ap.items()},
        "counts": {"tp": report.tp, "fp": report.fp, "fn": report.fn},
        "iou_threshold": round6(report.iou_threshold),
        "confidence_cut": round6(report.confidence_cut),
    }


def report_from_dict(raw: dict) -> EvalReport:
    return EvalReport(
        per_class_ap={int(c): float(ap) for c, ap in raw["per_class_ap"].items()},
        mean_ap=float(raw["map"]),
        precision_at_cut=float(raw["precision"]),
        recall_at_cut=float(raw["recall"]),
        f1=None if raw["f1"] is None else float(raw["f1"]),
        tp=int(raw["counts"]["tp"]),
        fp=int(raw["counts"]["fp"]),
        fn=int(raw["counts"]["fn"]),
        iou_threshold=float(raw["iou_threshold"]),
        confidence_cut=float(raw["confidence_cut"]),
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def load_report(path: str | Path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))
