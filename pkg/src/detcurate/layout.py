"""Fit box-layout statistics from a labeled dataset and sample plausible
grounding instructions for a layout-conditioned image generator.

Five parameters are fitted independently with sample mean and unbiased
variance: boxes per image, and the normalized center-x, center-y, width
and height of each box.  Sampling draws each parameter from its own
normal distribution; the per-image count is rounded and clamped to
[1, k_max], coordinates are clamped to the unit square, and boxes that
collapse below the minimum size are redrawn (bounded attempts).  Sampled
box overlap is allowed on purpose.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import round6
from .anno import BoundingBox, Dataset

MIN_BOX_SIZE = 0.01


@dataclass(frozen=True)
class ParamStats:
    mean: float
    var: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.var)):
            raise ValueError("layout statistics must be finite")
        if self.var < 0:
            raise ValueError(f"variance must be non-negative, got {self.var}")


@dataclass(frozen=True)
class LayoutStats:
    """Mean/variance of count-per-image and normalized box parameters."""

    count: ParamStats
    cx: ParamStats
    cy: ParamStats
    w: ParamStats
    h: ParamStats
    n_images: int
    n_boxes: int

    def __post_init__(self) -> None:
        if self.count.mean < 1:
            raise ValueError("count mean must be at least 1")
        for name in ("cx", "cy", "w", "h"):
            p: ParamStats = getattr(self, name)
            if not (0.0 <= p.mean <= 1.0):
                raise ValueError(f"normalized parameter {name} has mean {p.mean} outside [0, 1]")


@dataclass(frozen=True)
class GroundingInstruction:
    """Prompt plus entity phrases with their normalized target boxes."""

    prompt: str
    entities: tuple[tuple[str, BoundingBox], ...]
    style_ref: str | None = None

    def __post_init__(self) -> None:
        if not self.entities:
            raise ValueError("an instruction needs at least one entity")
        for _ref, box in self.entities:
            x1, y1, x2, y2 = box.corners
            if x1 < 0 or y1 < 0 or x2 > 1 or y2 > 1:
                raise ValueError(f"entity box {box} outside the unit square")


def _mean_var(values: list[float]) -> ParamStats:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
    return ParamStats(mean=mean, var=var)


def fit_layout(ds: Dataset) -> LayoutStats:
    """Pool per-image counts and normalized box parameters, fit moments.

    Images without annotations carry no layout information and are ignored;
    at least two annotated images are required.
    """
    annotated = [img for img in ds.images if img.annotations]
    if len(annotated) < 2:
        raise ValueError(
            f"need at least 2 images with annotations to fit a layout, got {len(annotated)}"
        )
    counts = [float(len(img.annotations)) for img in annotated]
    cx, cy, w, h = [], [], [], []
    for img in annotated:
        for box, _cat in img.annotations:
            cx.append((box.x + box.w / 2) / img.width)
            cy.append((box.y + box.h / 2) / img.height)
            w.append(box.w / img.width)
            h.append(box.h / img.height)
    return LayoutStats(
        count=_mean_var(counts),
        cx=_mean_var(cx),
        cy=_mean_var(cy),
        w=_mean_var(w),
        h=_mean_var(h),
        n_images=len(annotated),
        n_boxes=len(cx),
    )


def _sample_box(stats: LayoutStats, rng: np.random.Generator, max_attempts: int) -> BoundingBox:
    last_bad = "width"
    for _ in range(max_attempts):
        cx = rng.normal(stats.cx.mean, math.sqrt(stats.cx.var))
        cy = rng.normal(stats.cy.mean, math.sqrt(stats.cy.var))
        w = rng.normal(stats.w.mean, math.sqrt(stats.w.var))
        h = rng.normal(stats.h.mean, math.sqrt(stats.h.var))
        x1 = min(max(cx - w / 2, 0.0), 1.0)
        x2 = min(max(cx + w / 2, 0.0), 1.0)
        y1 = min(max(cy - h / 2, 0.0), 1.0)
        y2 = min(max(cy + h / 2, 0.0), 1.0)
        if x2 - x1 < MIN_BOX_SIZE:
            last_bad = "width"
            continue
        if y2 - y1 < MIN_BOX_SIZE:
            last_bad = "height"
            continue
        return BoundingBox(x1, y1, x2 - x1, y2 - y1)
    raise ValueError(
        f"box sampling failed {max_attempts} times; the fitted {last_bad} "
        "distribution is degenerate for the unit square"
    )


def sample_layout(
    stats: LayoutStats,
    rng_seed: int,
    n_images: int,
    entity_phrase: str,
    prompt_template: str,
    style_ref: str | None = None,
    k_max: int = 30,
    max_attempts: int = 100,
) -> list[GroundingInstruction]:
    """Draw ``n_images`` grounding instructions from the fitted layout.

    ``prompt_template`` receives the sampled box count through ``{n}``,
    e.g. ``"{n} boats on a lake"``.  Each image uses an RNG stream derived
    from (rng_seed, image index), so output is reproducible and insensitive
    to evaluation order.
    """
    if n_images < 1:
        raise ValueError("n_images must be at least 1")
    instructions = []
    for i in range(n_images):
        rng = np.random.default_rng([rng_seed, i])
        k = int(round(rng.normal(stats.count.mean, math.sqrt(stats.count.var))))
        k = min(max(k, 1), k_max)
        boxes = [_sample_box(stats, rng, max_attempts) for _ in range(k)]
        instructions.append(
            GroundingInstruction(
                prompt=prompt_template.format(n=k),
                entities=tuple((entity_phrase, b) for b in boxes),
                style_ref=style_ref,
            )
        )
    return instructions


def layout_stats_to_dict(stats: LayoutStats) -> dict:
    out: dict = {"n_images": stats.n_images, "n_boxes": stats.n_boxes}
    for name in ("count", "cx", "cy", "w", "h"):
        p: ParamStats = getattr(stats, name)
        out[name] = {"mean": round6(p.mean), "var": round6(p.var)}
    return out


def layout_stats_from_dict(raw: dict) -> LayoutStats:
    def p(name: str) -> ParamStats:
        return ParamStats(mean=float(raw[name]["mean"]), var=float(raw[name]["var"]))

    return LayoutStats(
        count=p("count"), cx=p("cx"), cy=p("cy"), w=p("w"), h=p("h"),
        n_images=int(raw["n_images"]), n_boxes=int(raw["n_boxes"]),
    )


def save_layout_stats(stats: LayoutStats, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(layout_stats_to_dict(stats), fh, indent=2)
        fh.write("\n")


def load_layout_stats(path: str | Path) -> LayoutStats:
    with open(path, "r", encoding="utf-8") as fh:
        return layout_stats_from_dict(json.load(fh))


def instructions_to_list(instructions: list[GroundingInstruction]) -> list[dict]:
    """Serialized entity boxes use the (cx, cy, w, h) center convention."""
    out = []
    for ins in instructions:
        entities = [
            {
                "ref": ref,
                "bbox_norm": [
                    round6(b.x + b.w / 2), round6(b.y + b.h / 2), round6(b.w), round6(b.h)
                ],
            }
            for ref, b in ins.entities
        ]
        rec: dict = {"prompt": ins.prompt, "entities": entities}
        if ins.style_ref is not None:
            rec["style_ref"] = ins.style_ref
        out.append(rec)
    return out


def instructions_from_list(raw: list) -> list[GroundingInstruction]:
    instructions = []
    for rec in raw:
        entities = []
        for ent in rec["entities"]:
            cx, cy, w, h = (float(v) for v in ent["bbox_norm"])
            x = min(max(cx - w / 2, 0.0), 1.0)
            y = min(max(cy - h / 2, 0.0), 1.0)
            w = min(w, 1.0 - x)
            h = min(h, 1.0 - y)
            entities.append((str(ent["ref"]), BoundingBox(x, y, w, h)))
        instructions.append(
            GroundingInstruction(
                prompt=str(rec["prompt"]),
                entities=tuple(entities),
                style_ref=rec.get("style_ref"),
            )
        )
    return instructions


def save_instructions(instructions: list[GroundingInstruction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instructions_to_list(instructions), fh, indent=2)
        fh.write("\n")


def load_instructions(path: str | Path) -> list[GroundingInstruction]:
    with open(path, "r", encoding="utf-8") as fh:
        return instructions_from_list(json.load(fh))
