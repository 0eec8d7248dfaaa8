"""Desk-scale synthetic reproduction of the two-stage pipeline: pretrain a
tiny detector on generated scenes (with controllable layout corruption and
a domain shift), fine-tune on scarce real scenes, and score test mAP.

A scene is a unit square covered by a fixed grid of overlapping anchor
boxes.  Each anchor carries a feature vector with three parts: a shared
signal direction scaled by the anchor's best IoU with any *visible*
object; a constant per-scene offset drawn from a clutter subspace (think
turbidity or lighting — a detector needs to see many scenes before it can
cancel it, which is what makes scene count matter); and Gaussian noise.
Generated scenes additionally carry a constant domain-shift offset.
Anchor labels mark IoU >= 0.5 with any *intended* object, so the two
corruption modes mirror the classic generator failures: a missed object
keeps its label but emits no signal, a spurious object emits signal with
no label.  Failures cluster into "bad generations" (exact per-object
marginal rates), which is what a whole-image filter can act on.

The detector is a logistic scorer shared across anchors (weights plus
bias, trained with the optim stack); its sigmoid output is the detection
confidence, and overlapping emissions are suppressed greedily before they
leave the detector.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from ._util import round6
from .anno import AnnotatedImage, BoundingBox, Dataset, Detection
from .geom import iou
from .layout import LayoutStats, ParamStats, sample_layout
from .metrics import evaluate
from .optim import (
    EarlyStopper,
    Hyper,
    OneXSchedule,
    OptimizerState,
    PlateauSchedule,
    TraceLog,
    early_stop_update,
    schedule_epoch,
    sgd_step,
    with_gamma,
)
from .prfilter import pr_filter

log = logging.getLogger(__name__)

CANVAS = 1000.0
CATEGORY = 1


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss; carries the trace so far."""

    def __init__(self, message: str, trace: TraceLog):
        super().__init__(message)
        self.trace = trace


def default_layout_stats() -> LayoutStats:
    """Layout of the synthetic domain: a few roughly anchor-sized boxes.

    Box sizes track the anchor size so most objects are reachable at
    IoU 0.5 by some anchor; unreachable ones act as permanent hard cases.
    """
    return LayoutStats(
        count=ParamStats(mean=2.0, var=0.5),
        cx=ParamStats(mean=0.5, var=0.02),
        cy=ParamStats(mean=0.5, var=0.02),
        w=ParamStats(mean=0.3, var=0.0001),
        h=ParamStats(mean=0.3, var=0.0001),
        n_images=0,
        n_boxes=0,
    )


def signal_direction(feature_dim: int) -> np.ndarray:
    """Unit vector every true object projects its signal onto."""
    return np.full(feature_dim, 1.0 / math.sqrt(feature_dim))


CLUTTER_DIMS = 12
CLUTTER_SCALES = tuple(0.4 + 0.15 * j for j in range(CLUTTER_DIMS))


def clutter_basis(feature_dim: int) -> np.ndarray:
    """Orthonormal basis of the per-scene clutter subspace (think
    turbidity, lighting, style): each scene carries a constant offset with
    independent U(-m_j, m_j) coordinates in this subspace, orthogonal to
    the signal direction.  The strengths m_j are staggered so a detector
    cancels the subspace gradually as it sees more scenes, giving a smooth
    mAP-versus-scene-count learning curve.
    """
    rng = np.random.default_rng(20240607)
    raw = rng.standard_normal((feature_dim, CLUTTER_DIMS + 1))
    raw[:, 0] = signal_direction(feature_dim)
    q = np.linalg.qr(raw)[0]
    return q[:, 1 : CLUTTER_DIMS + 1].T  # (CLUTTER_DIMS, feature_dim)


def default_domain_shift(feature_dim: int) -> tuple[float, ...]:
    """Offset added to generated-scene features: part along the signal
    direction (biases the scorer) and part orthogonal to it."""
    u = 1.0 / math.sqrt(feature_dim)
    return tuple(0.2 * u + (0.3 * u if i % 2 == 0 else -0.3 * u) for i in range(feature_dim))


ANCHOR_SCALE = 4.8  # anchor side as a multiple of the grid stride


def anchor_boxes(grid: int) -> list[BoundingBox]:
    """Row-major grid of overlapping square anchors (stride 1/grid, side
    ANCHOR_SCALE/grid, centered on the cell centers).  Edge anchors may
    overhang the unit square; that only lowers their IoU with edge boxes.
    """
    stride = 1.0 / grid
    size = ANCHOR_SCALE / grid
    return [
        BoundingBox((col + 0.5) * stride - size / 2, (row + 0.5) * stride - size / 2,
                    size, size)
        for row in range(grid)
        for col in range(grid)
    ]


@dataclass(frozen=True)
class CorruptionConfig:
    """Scene-generation noise model; zero everything for a pristine scene."""

    p_miss: float = 0.0
    p_spur: float = 0.0
    domain_shift: tuple[float, ...] | None = None
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_miss <= 1.0 and 0.0 <= self.p_spur <= 1.0):
            raise ValueError("corruption probabilities must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class ToyScene:
    """One synthetic image: intended boxes, anchor features, anchor labels."""

    image_id: str
    grid: int
    gt_boxes: tuple[BoundingBox, ...]
    features: np.ndarray  # (grid*grid, feature_dim)
    labels: np.ndarray  # (grid*grid,) 0.0 / 1.0

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        if feats.shape[0] != self.grid * self.grid or labels.shape != (feats.shape[0],):
            raise ValueError("features/labels do not cover the anchor grid")
        if not np.all(np.isfinite(feats)):
            raise ValueError("scene features must be finite")
        expected = _anchor_labels(self.grid, self.gt_boxes)
        if not np.array_equal(labels, expected):
            raise ValueError("labels inconsistent with the anchor IoU rule")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)


def _corners(boxes: list[BoundingBox]) -> np.ndarray:
    return np.array([b.corners for b in boxes], dtype=np.float64).reshape(-1, 4)


def _iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two corner-form box arrays, shape (len(a), len(b))."""
    if a.size == 0 or b.size == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    iw = np.clip(
        np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]),
        0.0, None,
    )
    ih = np.clip(
        np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]),
        0.0, None,
    )
    inter = iw * ih
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def _anchor_labels(grid: int, boxes: tuple[BoundingBox, ...]) -> np.ndarray:
    ious = _iou_matrix(_corners(anchor_boxes(grid)), _corners(list(boxes)))
    if ious.shape[1] == 0:
        return np.zeros(grid * grid)
    return (ious.max(axis=1) >= 0.5).astype(np.float64)


def gen_scene(
    stats: LayoutStats,
    seed: int,
    corruption: CorruptionConfig | None = None,
    image_id: str | None = None,
    grid: int = 16,
    feature_dim: int = 16,
) -> ToyScene:
    """Sample one scene: layout from ``stats``, features per the corruption
    model.  Deterministic in ``seed``."""
    instruction = sample_layout(stats, seed, 1, "object", "{n}")[0]
    boxes = tuple(b for _ref, b in instruction.entities)
    corr = corruption or CorruptionConfig()
    rng = np.random.default_rng([seed, 7919])

    # failures cluster: a scene is a "bad generation" with probability
    # 1.5 * max(p_miss, p_spur), and only bad scenes drop or misplace
    # objects, at rates chosen so the per-object marginals stay exact
    p_bad = min(1.0, 1.5 * max(corr.p_miss, corr.p_spur))
    if p_bad > 0 and rng.random() < p_bad:
        miss_p, spur_p = corr.p_miss / p_bad, corr.p_spur / p_bad
    else:
        miss_p = spur_p = 0.0
    visible = [b for b in boxes if rng.random() >= miss_p]
    phantoms: list[BoundingBox] = []
    for b in boxes:
        if rng.random() < spur_p:
            cx = rng.uniform(b.w / 2, 1.0 - b.w / 2)
            cy = rng.uniform(b.h / 2, 1.0 - b.h / 2)
            phantoms.append(BoundingBox(cx - b.w / 2, cy - b.h / 2, b.w, b.h))

    drawn = visible + phantoms
    ious = _iou_matrix(_corners(anchor_boxes(grid)), _corners(drawn))
    strength = ious.max(axis=1) if drawn else np.zeros(grid * grid)

    basis = clutter_basis(feature_dim)
    scales = np.asarray(CLUTTER_SCALES)
    clutter = (rng.uniform(-1.0, 1.0, basis.shape[0]) * scales) @ basis
    features = (
        strength[:, None] * signal_direction(feature_dim)[None, :] + clutter[None, :]
    )
    if corr.domain_shift is not None:
        shift = np.asarray(corr.domain_shift, dtype=np.float64)
        if shift.shape != (feature_dim,):
            raise ValueError(f"domain shift must have dim {feature_dim}")
        features = features + shift[None, :]
    if corr.noise_sigma > 0:
        features = features + rng.normal(0.0, corr.noise_sigma, features.shape)

    return ToyScene(
        image_id=image_id if image_id is not None else f"scene-{seed}",
        grid=grid,
        gt_boxes=boxes,
        features=features,
        labels=_anchor_labels(grid, boxes),
    )


@dataclass(frozen=True)
class StageHyper:
    gamma0: float = 1.0
    mu: float = 0.9
    weight_decay: float = 0.001
    batch_scenes: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and constants of the toy experiment; defaults run in seconds."""

    n_generated_grid: tuple[int, ...] = (0, 25, 50, 100, 200)
    n_real_grid: tuple[int, ...] = (0, 10)
    seeds: tuple[int, ...] = tuple(range(10))
    grid: int = 16
    feature_dim: int = 16
    use_pr_filter: bool = True
    corruption: CorruptionConfig = field(
        default_factory=lambda: CorruptionConfig(
            p_miss=0.1, p_spur=0.1, domain_shift=default_domain_shift(16), noise_sigma=0.12
        )
    )
    real_noise_sigma: float = 0.12
    layout: LayoutStats = field(default_factory=default_layout_stats)
    n_test: int = 50
    pretrain: StageHyper = StageHyper(gamma0=1.0, mu=0.9, weight_decay=0.001, batch_scenes=2)
    finetune: StageHyper = StageHyper(gamma0=1.0, mu=0.9, weight_decay=0.01, batch_scenes=8)
    val_fraction: float = 0.15
    min_confidence: float = 0.05
    filter_confidence: float = 0.2
    filter_iou: float = 0.3
    filter_p_thresh: float = 1.0
    filter_r_thresh: float = 1.0
    min_delta: float = 0.0

    def __post_init__(self) -> None:
        if any(n < 0 for n in self.n_generated_grid + self.n_real_grid):
            raise ValueError("grid sizes must be non-negative")
        if not self.seeds:
            raise ValueError("need at least one seed")


def scene_centered(scene: ToyScene) -> ToyScene:
    """The scene with its features centered on their per-scene mean.

    Centering cancels constant per-scene offsets (clutter, domain shift),
    which is what makes the filtering detector's per-image verdicts usable
    after training on only a handful of scenes — the stand-in for the
    robust pretrained detector a full pipeline would filter with.  The
    experiment's trainee detectors never get this normalization; they must
    learn the offsets from data, which is the point of the exercise.
    """
    return ToyScene(
        image_id=scene.image_id,
        grid=scene.grid,
        gt_boxes=scene.gt_boxes,
        features=scene.features - scene.features.mean(axis=0, keepdims=True),
        labels=scene.labels,
    )


def _stack(scenes: list[ToyScene]) -> tuple[np.ndarray, np.ndarray]:
    """All anchor rows of all scenes, with a trailing ones column for the
    bias (weight decay then applies to the bias too, on purpose)."""
    feats = np.concatenate([s.features for s in scenes], axis=0)
    x = np.concatenate([feats, np.ones((feats.shape[0], 1))], axis=1)
    y = np.concatenate([s.labels for s in scenes])
    return x, y


def _bce(x: np.ndarray, y: np.ndarray, theta: np.ndarray) -> float:
    z = x @ theta
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))))


def _bce_grad(x: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return x.T @ (expit(x @ theta) - y) / x.shape[0]


def random_init(feature_dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 433])
    return 0.01 * rng.standard_normal(feature_dim + 1)


def _epoch_pass(
    state: OptimizerState,
    scenes: list[ToyScene],
    batch_scenes: int,
    rng: np.random.Generator,
) -> OptimizerState:
    """One epoch: shuffled minibatches of whole scenes, one step each."""
    order = rng.permutation(len(scenes))
    for start in range(0, len(order), batch_scenes):
        chunk = [scenes[i] for i in order[start : start + batch_scenes]]
        x, y = _stack(chunk)
        state = sgd_step(state, _bce_grad(x, y, state.theta))
    return state


def train_toy_detector(
    scenes: list[ToyScene],
    stage: str,
    init: np.ndarray | None,
    config: ExperimentConfig,
    init_seed: int = 0,
    trace: TraceLog | None = None,
) -> np.ndarray:
    """Fit the logistic anchor scorer with the stage's optimizer policy.

    ``pretrain`` holds out the trailing validation fraction of the scenes
    and runs plateau scheduling plus early stopping (best weights kept);
    ``finetune`` trains on everything for the fixed 12-epoch schedule.
    An epoch is one shuffled pass over the scenes in minibatches;
    ``init_seed`` also seeds the shuffling, so runs are reproducible.
    """
    if not scenes:
        raise ValueError("cannot train on an empty scene list")
    if stage not in ("pretrain", "finetune"):
        raise ValueError(f"unknown stage {stage!r}")
    trace = trace if trace is not None else TraceLog()

    if stage == "pretrain" and len(scenes) >= 2:
        n_val = max(1, int(round(config.val_fraction * len(scenes))))
        train_scenes, val_scenes = scenes[:-n_val], scenes[-n_val:]
    else:
        train_scenes, val_scenes = scenes, []
    x_train, y_train = _stack(train_scenes)
    x_val, y_val = _stack(val_scenes) if val_scenes else (x_train, y_train)

    hyper = config.pretrain if stage == "pretrain" else config.finetune
    theta0 = init if init is not None else random_init(config.feature_dim, init_seed)
    state = OptimizerState.init(
        theta0, Hyper(mu=hyper.mu, weight_decay=hyper.weight_decay, gamma=hyper.gamma0)
    )

    if stage == "pretrain":
        sched = PlateauSchedule(min_delta=config.min_delta)
        stopper = EarlyStopper(min_delta=config.min_delta)
        mult = 1.0
        for epoch in range(1, stopper.max_epochs + 1):
            state = with_gamma(state, hyper.gamma0 * mult)
            rng = np.random.default_rng([init_seed, 555, epoch])
            state = _epoch_pass(state, train_scenes, hyper.batch_scenes, rng)
            train_loss = _bce(x_train, y_train, state.theta)
            val_loss = _bce(x_val, y_val, state.theta)
            if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                trace.add(epoch, state.hyper.gamma, train_loss, val_loss, "diverged")
                raise DivergenceError(f"non-finite loss at epoch {epoch}", trace)
            new_mult = schedule_epoch(sched, epoch, val_loss)
            verdict = early_stop_update(stopper, epoch, val_loss, state.theta)
            action = "lr_drop" if new_mult != mult else verdict
            trace.add(epoch, state.hyper.gamma, train_loss, val_loss, action)
            mult = new_mult
            if verdict == "stop":
                break
        assert stopper.best_weights is not None
        return stopper.best_weights

    sched = OneXSchedule()
    for epoch in range(1, sched.total + 1):
        state = with_gamma(state, hyper.gamma0 * schedule_epoch(sched, epoch))
        rng = np.random.default_rng([init_seed, 555, epoch])
        state = _epoch_pass(state, train_scenes, hyper.batch_scenes, rng)
        train_loss = _bce(x_train, y_train, state.theta)
        if not math.isfinite(train_loss):
            trace.add(epoch, state.hyper.gamma, train_loss, None, "diverged")
            raise DivergenceError(f"non-finite loss at epoch {epoch}", trace)
        trace.add(epoch, state.hyper.gamma, train_loss, None, "continue")
    return state.theta


def detect(
    theta: np.ndarray,
    scenes: list[ToyScene],
    min_confidence: float = 0.05,
    nms_iou: float = 0.3,
) -> list[Detection]:
    """Score every anchor of every scene; emit those above the floor.

    Overlapping anchors fire together for one object, so the detector
    suppresses any emission overlapping a higher-scored one (greedy NMS);
    downstream metrics assume this already happened.
    """
    dets: list[Detection] = []
    for scene in scenes:
        anchors = anchor_boxes(scene.grid)
        x = np.concatenate(
            [scene.features, np.ones((scene.features.shape[0], 1))], axis=1
        )
        probs = expit(x @ theta)
        ranked = sorted(
            (i for i in range(len(anchors)) if probs[i] >= min_confidence),
            key=lambda i: -probs[i],
        )
        kept: list[int] = []
        for i in ranked:
            if all(iou(anchors[i], anchors[j]) < nms_iou for j in kept):
                kept.append(i)
        dets.extend(
            Detection(scene.image_id, CATEGORY, anchors[i].scaled(CANVAS), float(probs[i]))
            for i in sorted(kept)
        )
    return dets


def scenes_to_dataset(scenes: list[ToyScene]) -> Dataset:
    """The intended boxes of the scenes as an evaluation dataset."""
    images = tuple(
        AnnotatedImage(
            s.image_id, CANVAS, CANVAS, tuple((b.scaled(CANVAS), CATEGORY) for b in s.gt_boxes)
        )
        for s in scenes
    )
    return Dataset(categories={CATEGORY: "object"}, images=images)


@dataclass(frozen=True)
class ResultRow:
    n_generated: int
    n_real: int
    filtered: bool
    seed: int
    mean_ap: float


def _child_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run the full (n_generated x n_real x filtered x seed) grid and
    return one test-mAP row per cell.  Byte-for-byte deterministic in the
    config."""
    rows: list[ResultRow] = []
    real_corr = CorruptionConfig(noise_sigma=config.real_noise_sigma)
    max_real = max(config.n_real_grid)
    max_gen = max(config.n_generated_grid)

    for seed in config.seeds:
        test_scenes = [
            gen_scene(config.layout, _child_seed(seed, 1, i), real_corr,
                      image_id=f"test-{i:04d}", grid=config.grid,
                      feature_dim=config.feature_dim)
            for i in range(config.n_test)
        ]
        test_ds = scenes_to_dataset(test_scenes)
        real_all = [
            gen_scene(config.layout, _child_seed(seed, 2, i), real_corr,
                      image_id=f"real-{i:04d}", grid=config.grid,
                      feature_dim=config.feature_dim)
            for i in range(max_real)
        ]
        gen_all = [
            gen_scene(config.layout, _child_seed(seed, 3, i), config.corruption,
                      image_id=f"gen-{i:04d}", grid=config.grid,
                      feature_dim=config.feature_dim)
            for i in range(max_gen)
        ]

        for n_real in config.n_real_grid:
            real_scenes = real_all[:n_real]
            kept_ids: set[str] = set()
            if config.use_pr_filter and n_real > 0 and max_gen > 0:
                # filtering detector: fitted to the small real set with the
                # long recipe, single-scene batches, and scene-centered
                # features so its per-image verdicts are usable (see
                # scene_centered); verdicts use a looser IoU gate because
                # the anchor grid quantizes the boxes it can emit
                fcfg = replace(config, pretrain=replace(config.pretrain, batch_scenes=1))
                filter_theta = train_toy_detector(
                    [scene_centered(s) for s in real_scenes], "pretrain", None, fcfg,
                    init_seed=_child_seed(seed, 4, n_real),
                )
                filter_dets = detect(
                    filter_theta,
                    [scene_centered(s) for s in gen_all],
                    config.filter_confidence,
                )
                _kept, decisions = pr_filter(
                    scenes_to_dataset(gen_all), filter_dets,
                    config.filter_p_thresh, config.filter_r_thresh,
                    iou_threshold=config.filter_iou,
                )
                kept_ids = {d.image_id for d in decisions if d.kept}

            for n_gen in config.n_generated_grid:
                arms = [False]
                if config.use_pr_filter and n_gen > 0 and n_real > 0:
                    arms.append(True)
                for filtered in arms:
                    pretrain_scenes = gen_all[:n_gen]
                    if filtered:
                        pretrain_scenes = [
                            s for s in pretrain_scenes if s.image_id in kept_ids
                        ]
                    theta = None
                    if pretrain_scenes:
                        theta = train_toy_detector(
                            pretrain_scenes, "pretrain", None, config,
                            init_seed=_child_seed(seed, 5, n_real),
                        )
                    if real_scenes:
                        theta = train_toy_detector(
                            real_scenes, "finetune", theta, config,
                            init_seed=_child_seed(seed, 6, n_real),
                        )
                    if theta is None:
                        theta = random_init(config.feature_dim, _child_seed(seed, 6, n_real))
                    report = evaluate(
                        detect(theta, test_scenes, config.min_confidence), test_ds
                    )
                    rows.append(ResultRow(n_gen, n_real, filtered, seed, report.mean_ap))
                    log.debug(
                        "seed=%d n_gen=%d n_real=%d filtered=%s map=%.4f",
                        seed, n_gen, n_real, filtered, report.mean_ap,
                    )
    return rows


def results_to_csv(rows: list[ResultRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_generated", "n_real", "filtered", "seed", "map"])
        for r in rows:
            writer.writerow(
                [r.n_generated, r.n_real, str(r.filtered).lower(), r.seed, f"{r.mean_ap:.6g}"]
            )


def load_results_csv(path: str | Path) -> list[ResultRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                ResultRow(
                    n_generated=int(rec["n_generated"]),
                    n_real=int(rec["n_real"]),
                    filtered=rec["filtered"] == "true",
                    seed=int(rec["seed"]),
                    mean_ap=float(rec["map"]),
                )
            )
    return rows


def aggregate_results(rows: list[ResultRow]) -> list[dict]:
    """Mean/stddev test mAP per grid cell, in a stable order."""
    cells: dict[tuple[int, int, bool], list[float]] = {}
    for r in rows:
        cells.setdefault((r.n_generated, r.n_real, r.filtered), []).append(r.mean_ap)
    out = []
    for (n_gen, n_real, filtered), values in sorted(cells.items()):
        arr = np.asarray(values)
        out.append(
            {
                "n_generated": n_gen,
                "n_real": n_real,
                "filtered": filtered,
                "mean_map": round6(float(arr.mean())),
                "std_map": round6(float(arr.std(ddof=1))) if arr.size > 1 else 0.0,
                "n_seeds": int(arr.size),
            }
        )
    return out


def save_aggregate(rows: list[ResultRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(aggregate_results(rows), fh, indent=2)
        fh.write("\n")
