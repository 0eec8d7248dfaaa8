"""Whole-image precision/recall filter over a generated dataset.

Each image is matched (class-aware) against the detections a filtering
detector produced for it; the image survives only if per-image precision
and recall both meet their thresholds.  Undefined metrics pass their test:
no detections means nothing was placed wrongly (precision passes), no
ground truth means nothing could be missed (recall passes), and an image
that is empty on both sides is kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ._util import pmap, round6
from .anno import AnnotatedImage, Dataset, Detection
from .geom import PrecisionRecall, match_image_classwise, precision_recall


class Reason(str, Enum):
    PASS = "pass"
    LOW_PRECISION = "low_precision"
    LOW_RECALL = "low_recall"
    EMPTY_UNDEFINED = "empty_undefined"


@dataclass(frozen=True)
class FilterDecision:
    image_id: str
    pr: PrecisionRecall
    tp: int
    fp: int
    fn: int
    kept: bool
    reason: Reason


def _decide(img: AnnotatedImage, dets: list[Detection], p_thresh: float,
            r_thresh: float, iou_threshold: float) -> FilterDecision:
    m = match_image_classwise(list(img.annotations), dets, iou_threshold)
    pr = precision_recall(m)
    if pr.precision is not None and pr.precision < p_thresh:
        kept, reason = False, Reason.LOW_PRECISION
    elif pr.recall is not None and pr.recall < r_thresh:
        kept, reason = False, Reason.LOW_RECALL
    elif pr.precision is None and pr.recall is None:
        kept, reason = True, Reason.EMPTY_UNDEFINED
    else:
        kept, reason = True, Reason.PASS
    return FilterDecision(
        image_id=img.image_id, pr=pr, tp=m.tp, fp=m.fp, fn=m.fn, kept=kept, reason=reason
    )


def pr_filter(
    gen_gt: Dataset,
    filter_dets: list[Detection],
    p_thresh: float = 1.0,
    r_thresh: float = 1.0,
    iou_threshold: float = 0.5,
    jobs: int = 1,
) -> tuple[Dataset, list[FilterDecision]]:
    """Filter a generated dataset by per-image precision/recall.

    Returns the kept sub-dataset (annotations untouched) and one decision
    per input image, in input order.
    """
    if not (0.0 <= p_thresh <= 1.0 and 0.0 <= r_thresh <= 1.0):
        raise ValueError("thresholds must be in [0, 1]")
    by_image: dict[str, list[Detection]] = {}
    for d in filter_dets:
        if d.image_id not in gen_gt:
            raise ValueError(f"detection references unknown image {d.image_id!r}")
        by_image.setdefault(d.image_id, []).append(d)

    decisions = pmap(
        lambda img: _decide(img, by_image.get(img.image_id, []),
                            p_thresh, r_thresh, iou_threshold),
        gen_gt.images,
        jobs=jobs,
    )
    kept_ids = {d.image_id for d in decisions if d.kept}
    kept = Dataset(
        categories=dict(gen_gt.categories),
        images=tuple(img for img in gen_gt.images if img.image_id in kept_ids),
    )
    return kept, decisions


def decisions_to_dict(decisions: list[FilterDecision], p_thresh: float,
                      r_thresh: float, iou_threshold: float) -> dict:
    total = len(decisions)
    kept = sum(1 for d in decisions if d.kept)
    return {
        "thresholds": {
            "precision": round6(p_thresh),
            "recall": round6(r_thresh),
            "iou": round6(iou_threshold),
        },
        "total": total,
        "kept_count": kept,
        "kept_fraction": round6(kept / total) if total else None,
        "decisions": [
            {
                "image_id": d.image_id,
                "precision": None if d.pr.precision is None else round6(d.pr.precision),
                "recall": None if d.pr.recall is None else round6(d.pr.recall),
                "tp": d.tp,
                "fp": d.fp,
                "fn": d.fn,
                "kept": d.kept,
                "reason": d.reason.value,
            }
            for d in decisions
        ],
    }


def decisions_from_dict(raw: dict) -> list[FilterDecision]:
    out = []
    for rec in raw["decisions"]:
        out.append(
            FilterDecision(
                image_id=str(rec["image_id"]),
                pr=PrecisionRecall(
                    precision=None if rec["precision"] is None else float(rec["precision"]),
                    recall=None if rec["recall"] is None else float(rec["recall"]),
                ),
                tp=int(rec["tp"]),
                fp=int(rec["fp"]),
                fn=int(rec["fn"]),
                kept=bool(rec["kept"]),
                reason=Reason(rec["reason"]),
            )
        )
    return out


def save_decisions(decisions: list[FilterDecision], path: str | Path,
                   p_thresh: float, r_thresh: float, iou_threshold: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(decisions_to_dict(decisions, p_thresh, r_thresh, iou_threshold), fh, indent=2)
        fh.write("\n")


def load_decisions(path: str | Path) -> list[FilterDecision]:
    with open(path, "r", encoding="utf-8") as fh:
        return decisions_from_dict(json.load(fh))
