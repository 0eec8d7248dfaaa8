"""Annotation data model and JSON ingestion for ground truth and detections.

The ground-truth file is a COCO-style JSON document (see ``schemas/``):
top-level ``images`` / ``annotations`` / ``categories`` lists, boxes given
as ``[x, y, w, h]`` with a top-left pixel origin.  Boxes that stick out of
the image are clipped on load; boxes entirely outside are dropped.  Both
events emit a :class:`DataWarning`.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    """An input file or record violates the documented schema."""


class DataWarning(UserWarning):
    """Recoverable data issue (clipped or dropped boxes, duplicate ids)."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left origin, (x, y, w, h) with w, h > 0."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite bounding box field {name}={v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bounding box must have positive size, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form used by all geometry code."""
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    def scaled(self, s: float) -> "BoundingBox":
        if s <= 0:
            raise ValueError("scale must be positive")
        return BoundingBox(self.x * s, self.y * s, self.w * s, self.h * s)


@dataclass(frozen=True)
class AnnotatedImage:
    """One image with its (box, category_id) ground-truth annotations."""

    image_id: str
    width: float
    height: float
    annotations: tuple[tuple[BoundingBox, int], ...] = ()

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image {self.image_id!r} has non-positive dimensions")
        for box, _cat in self.annotations:
            x1, y1, x2, y2 = box.corners
            if x1 < 0 or y1 < 0 or x2 > self.width or y2 > self.height:
                raise ValueError(
                    f"annotation box {box} exceeds image bounds "
                    f"{self.width}x{self.height} on image {self.image_id!r}"
                )


@dataclass(frozen=True)
class Detection:
    """One predicted box with its class and confidence score."""

    image_id: str
    category_id: int
    box: BoundingBox
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class Dataset:
    """Category table plus annotated images; image ids are unique."""

    categories: dict[int, str]
    images: tuple[AnnotatedImage, ...]
    _by_id: dict[str, AnnotatedImage] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        seen: dict[str, AnnotatedImage] = {}
        for img in self.images:
            if img.image_id in seen:
                raise ValueError(f"duplicate image id {img.image_id!r}")
            seen[img.image_id] = img
            for _box, cat in img.annotations:
                if cat not in self.categories:
                    raise SchemaError(f"unknown category {cat} on image {img.image_id!r}")
        object.__setattr__(self, "_by_id", seen)

    def image(self, image_id: str) -> AnnotatedImage:
        return self._by_id[image_id]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    @property
    def annotation_count(self) -> int:
        return sum(len(img.annotations) for img in self.images)


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise SchemaError(f"{where} is missing required field {key!r}")
    return record[key]


def _parse_bbox(raw, where: str) -> tuple[float, float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise SchemaError(f"{where}: bbox must be a list of 4 numbers, got {raw!r}")
    try:
        x, y, w, h = (float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: bbox has non-numeric entries: {raw!r}") from exc
    if not all(math.isfinite(v) for v in (x, y, w, h)):
        raise SchemaError(f"{where}: bbox has non-finite entries: {raw!r}")
    if w <= 0 or h <= 0:
        raise SchemaError(f"{where}: bbox has non-positive size: {raw!r}")
    return x, y, w, h


def _clip_box(x: float, y: float, w: float, h: float, width: float, height: float,
              where: str) -> BoundingBox | None:
    """Clip to image bounds; None means the box lies entirely outside."""
    x1, y1 = max(x, 0.0), max(y, 0.0)
    x2, y2 = min(x + w, width), min(y + h, height)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        warnings.warn(f"{where}: box entirely outside the image, dropped", DataWarning)
        return None
    if (x1, y1, x2, y2) != (x, y, x + w, y + h):
        warnings.warn(f"{where}: box clipped to image bounds", DataWarning)
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def load_ground_truth(path: str | Path) -> Dataset:
    """Load and validate a ground-truth JSON file into a Dataset.

    Raises OSError on I/O failure and SchemaError on any schema violation
    (missing fields, non-positive sizes, duplicate image ids, references
    to unknown images or categories).
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be a JSON object")
    return dataset_from_dict(raw, where=str(path))


def dataset_from_dict(raw: dict, where: str = "<memory>") -> Dataset:
    for key in ("images", "annotations", "categories"):
        if key not in raw:
            raise SchemaError(f"{where}: missing top-level key {key!r}")

    categories: dict[int, str] = {}
    for rec in raw["categories"]:
        cid = _require(rec, "id", f"{where} category")
        name = _require(rec, "name", f"{where} category")
        if not isinstance(cid, int):
            raise SchemaError(f"{where}: category id must be an integer, got {cid!r}")
        if cid in categories:
            raise SchemaError(f"{where}: duplicate category id {cid}")
        categories[cid] = str(name)

    dims: dict[str, tuple[float, float]] = {}
    for rec in raw["images"]:
        iid = str(_require(rec, "id", f"{where} image"))
        width = _require(rec, "width", f"{where} image {iid}")
        height = _require(rec, "height", f"{where} image {iid}")
        if not (isinstance(width, (int, float)) and isinstance(height, (int, float))):
            raise SchemaError(f"{where}: image {iid}: dimensions must be numbers")
        if width <= 0 or height <= 0:
            raise SchemaError(f"{where}: image {iid}: non-positive dimensions")
        if iid in dims:
            raise SchemaError(f"{where}: duplicate image id {iid!r}")
        dims[iid] = (float(width), float(height))

    anns: dict[str, list[tuple[BoundingBox, int]]] = {iid: [] for iid in dims}
    for i, rec in enumerate(raw["annotations"]):
        spot = f"{where} annotation #{i}"
        iid = str(_require(rec, "image_id", spot))
        cat = _require(rec, "category_id", spot)
        if iid not in dims:
            raise SchemaError(f"{spot}: unknown image id {iid!r}")
        if cat not in categories:
            raise SchemaError(f"{spot}: unknown category {cat!r}")
        x, y, w, h = _parse_bbox(_require(rec, "bbox", spot), spot)
        width, height = dims[iid]
        box = _clip_box(x, y, w, h, width, height, spot)
        if box is not None:
            anns[iid].append((box, cat))

    images = tuple(
        AnnotatedImage(iid, dims[iid][0], dims[iid][1], tuple(anns[iid])) for iid in dims
    )
    return Dataset(categories=categories, images=images)


def dataset_to_dict(ds: Dataset) -> dict:
    """Inverse of dataset_from_dict; load(save(ds)) == ds."""
    return {
        "images": [
            {"id": img.image_id, "width": img.width, "height": img.height}
            for img in ds.images
        ],
        "annotations": [
            {"image_id": img.image_id, "category_id": cat, "bbox": [b.x, b.y, b.w, b.h]}
            for img in ds.images
            for b, cat in img.annotations
        ],
        "categories": [{"id": cid, "name": name} for cid, name in ds.categories.items()],
    }


def save_ground_truth(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_dict(ds), fh, indent=2)
        fh.write("\n")


def load_detections(path: str | Path, gt: Dataset) -> list[Detection]:
    """Load a detection JSON list, validated against the ground truth.

    Results are sorted stably by (image_id, descending confidence).
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return detections_from_list(raw, gt, where=str(path))


def detections_from_list(raw, gt: Dataset, where: str = "<memory>") -> list[Detection]:
    if not isinstance(raw, list):
        raise SchemaError(f"{where}: detection file must be a JSON list")
    dets: list[Detection] = []
    for i, rec in enumerate(raw):
        spot = f"{where} detection #{i}"
        iid = str(_require(rec, "image_id", spot))
        if iid not in gt:
            raise SchemaError(f"{spot}: unknown image id {iid!r}")
        cat = _require(rec, "category_id", spot)
        score = _require(rec, "score", spot)
        if not isinstance(score, (int, float)) or not (0.0 <= score <= 1.0):
            raise SchemaError(f"{spot}: score must be a number in [0, 1], got {score!r}")
        x, y, w, h = _parse_bbox(_require(rec, "bbox", spot), spot)
        dets.append(Detection(iid, cat, BoundingBox(x, y, w, h), float(score)))
    dets.sort(key=lambda d: (d.image_id, -d.confidence))
    return dets


def detections_to_list(dets: list[Detection]) -> list[dict]:
    return [
        {
            "image_id": d.image_id,
            "category_id": d.category_id,
            "bbox": [d.box.x, d.box.y, d.box.w, d.box.h],
            "score": d.confidence,
        }
        for d in dets
    ]


def save_detections(dets: list[Detection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(detections_to_list(dets), fh, indent=2)
        fh.write("\n")


def filter_small_boxes(ds: Dataset, min_area_fraction: float = 0.002) -> Dataset:
    """Drop annotations whose area is strictly below the image-area fraction.

    The comparison is strict: a box at exactly the threshold is kept.
    Images are retained even when all their boxes are removed.  Boxes are
    compared as stored, i.e. after any clipping applied on load.
    """
    if not (0.0 <= min_area_fraction < 1.0):
        raise ValueError("min_area_fraction must be in [0, 1)")
    images = []
    removed = 0
    for img in ds.images:
        cutoff = min_area_fraction * img.width * img.height
        kept = tuple((b, c) for b, c in img.annotations if not b.area < cutoff)
        removed += len(img.annotations) - len(kept)
        images.append(AnnotatedImage(img.image_id, img.width, img.height, kept))
    if removed:
        log.debug("filter_small_boxes removed %d annotations", removed)
    return Dataset(categories=dict(ds.categories), images=tuple(images))
