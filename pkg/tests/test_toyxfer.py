import numpy as np
import pytest

from detcurate.geom import iou
from detcurate.metrics import evaluate
from detcurate.optim import TraceLog
from detcurate.toyxfer import (
    CorruptionConfig,
    DivergenceError,
    ExperimentConfig,
    ToyScene,
    aggregate_results,
    anchor_boxes,
    default_domain_shift,
    default_layout_stats,
    detect,
    gen_scene,
    load_results_csv,
    results_to_csv,
    run_experiment,
    scene_centered,
    scenes_to_dataset,
    signal_direction,
    train_toy_detector,
)

STATS = default_layout_stats()


def anchor_aligned_scene(image_id="s", slots=((5, 5), (10, 9)), grid=16):
    """Scene whose ground truths coincide exactly with anchor boxes."""
    anchors = anchor_boxes(grid)
    boxes = tuple(anchors[r * grid + c] for r, c in slots)
    labels = np.zeros(grid * grid)
    strength = np.zeros(grid * grid)
    for i, a in enumerate(anchors):
        best = max((iou(a, b) for b in boxes), default=0.0)
        strength[i] = best
        if best >= 0.5:
            labels[i] = 1.0
    features = strength[:, None] * signal_direction(16)[None, :]
    return ToyScene(image_id=image_id, grid=grid, gt_boxes=boxes,
                    features=features, labels=labels)


def test_gen_scene_deterministic():
    a = gen_scene(STATS, 123)
    b = gen_scene(STATS, 123)
    assert a.gt_boxes == b.gt_boxes
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, gen_scene(STATS, 124).features)


def test_gen_scene_noiseless_separability():
    scene = gen_scene(STATS, 5, corruption=None)
    norms = np.linalg.norm(scene.features, axis=1)
    pos, neg = norms[scene.labels == 1.0], norms[scene.labels == 0.0]
    if pos.size:
        assert pos.min() > neg.max()


def test_gen_scene_total_miss_has_no_signal():
    scene = gen_scene(STATS, 5, CorruptionConfig(p_miss=1.0))
    # nothing was drawn: every anchor sees pure background (the per-scene
    # clutter offset), with zero anchor-to-anchor variation
    assert np.allclose(scene.features - scene.features[0], 0.0)
    assert scene.labels.sum() > 0  # intended labels survive


def test_gen_scene_labels_follow_iou_rule():
    scene = gen_scene(STATS, 17)
    anchors = anchor_boxes(scene.grid)
    for i, a in enumerate(anchors):
        expected = float(any(iou(a, b) >= 0.5 for b in scene.gt_boxes))
        assert scene.labels[i] == expected


def test_toyscene_rejects_inconsistent_labels():
    scene = gen_scene(STATS, 3)
    with pytest.raises(ValueError, match="inconsistent"):
        ToyScene(scene.image_id, scene.grid, scene.gt_boxes,
                 scene.features, 1.0 - scene.labels)


def test_scene_centered_keeps_labels_and_zeroes_mean():
    scene = gen_scene(STATS, 9, CorruptionConfig(noise_sigma=0.1))
    centered = scene_centered(scene)
    assert np.allclose(centered.features.mean(axis=0), 0.0, atol=1e-12)
    assert np.array_equal(centered.labels, scene.labels)


def test_corruption_validation():
    with pytest.raises(ValueError):
        CorruptionConfig(p_miss=1.5)
    with pytest.raises(ValueError):
        CorruptionConfig(noise_sigma=-1.0)


def _tiny_config(**kw):
    defaults = dict(
        n_generated_grid=(0, 10), n_real_grid=(0, 4), seeds=(0, 1),
        n_test=8,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_train_separable_scenes_reaches_low_loss_and_full_map():
    scenes = [anchor_aligned_scene(f"s{i}", ((3 + i % 3, 4), (9, 10 - i % 4)))
              for i in range(8)]
    config = _tiny_config()
    trace = TraceLog()
    theta = train_toy_detector(scenes, "pretrain", None, config, init_seed=0, trace=trace)
    assert trace.rows[-1][2] < 0.1  # training loss collapses
    report = evaluate(detect(theta, scenes, 0.05), scenes_to_dataset(scenes))
    assert report.mean_ap == 1.0


def test_train_rejects_empty_and_bad_stage():
    config = _tiny_config()
    with pytest.raises(ValueError, match="empty"):
        train_toy_detector([], "pretrain", None, config)
    with pytest.raises(ValueError, match="stage"):
        train_toy_detector([gen_scene(STATS, 0)], "warmup", None, config)


def test_train_divergence_raises_with_trace():
    scenes = [gen_scene(STATS, i, CorruptionConfig(noise_sigma=0.1)) for i in range(4)]
    config = _tiny_config(finetune=ExperimentConfig().finetune.__class__(
        gamma0=1e150, mu=0.9, weight_decay=1e150, batch_scenes=2))
    with pytest.raises(DivergenceError) as exc_info:
        train_toy_detector(scenes, "finetune", None, config, init_seed=0)
    assert exc_info.value.trace.rows


def test_pretrained_init_beats_random_init_on_scarce_data():
    config = ExperimentConfig()
    corr = config.corruption
    rc = CorruptionConfig(noise_sigma=config.real_noise_sigma)
    from detcurate.toyxfer import _bce, _stack

    gaps = []
    for seed in range(10):
        real = [gen_scene(STATS, 9000 + 17 * seed + i, rc, image_id=f"r{i}")
                for i in range(10)]
        gen = [gen_scene(STATS, 500 + 211 * seed + i, corr, image_id=f"g{i}")
               for i in range(60)]
        pre = train_toy_detector(gen, "pretrain", None, config, init_seed=seed)
        warm = train_toy_detector(real, "finetune", pre, config, init_seed=seed)
        cold = train_toy_detector(real, "finetune", None, config, init_seed=seed)
        x, y = _stack(real)
        gaps.append(_bce(x, y, cold) - _bce(x, y, warm))
    assert float(np.mean(gaps)) > 0.0


def test_run_experiment_deterministic_and_complete():
    config = _tiny_config()
    rows_a = run_experiment(config)
    rows_b = run_experiment(config)
    assert rows_a == rows_b
    cells = {(r.n_generated, r.n_real, r.filtered) for r in rows_a}
    assert (0, 0, False) in cells and (10, 4, True) in cells
    assert all(0.0 <= r.mean_ap <= 1.0 for r in rows_a)
    # per-seed rows for every unfiltered cell
    assert sum(1 for r in rows_a if not r.filtered) == 4 * len(config.seeds)


def test_null_model_scores_near_zero():
    config = _tiny_config(n_generated_grid=(0,), n_real_grid=(0,), seeds=(0, 1, 2))
    rows = run_experiment(config)
    assert float(np.mean([r.mean_ap for r in rows])) < 0.15


def test_results_csv_round_trip(tmp_path):
    config = _tiny_config()
    rows = run_experiment(config)
    path = tmp_path / "results.csv"
    results_to_csv(rows, path)
    loaded = load_results_csv(path)
    assert [(r.n_generated, r.n_real, r.filtered, r.seed) for r in loaded] == \
        [(r.n_generated, r.n_real, r.filtered, r.seed) for r in rows]
    for a, b in zip(loaded, rows):
        assert a.mean_ap == pytest.approx(b.mean_ap, abs=1e-6)
    agg = aggregate_results(rows)
    assert all(cell["n_seeds"] == len(config.seeds) for cell in agg)


@pytest.mark.slow
def test_monotone_in_real_data():
    config = ExperimentConfig(
        n_generated_grid=(0,), n_real_grid=(0, 10, 60, 150), seeds=tuple(range(10)),
        use_pr_filter=False, n_test=30,
    )
    rows = run_experiment(config)
    means = {
        cell["n_real"]: cell["mean_map"]
        for cell in aggregate_results(rows)
    }
    ordered = [means[n] for n in (0, 10, 60, 150)]
    for a, b in zip(ordered, ordered[1:]):
        assert b >= a - 0.02
    # the fully supervised arm is the internal reference ceiling
    assert ordered[-1] > 0.5


@pytest.mark.slow
def test_transfer_benefit_and_filter_convergence():
    config = ExperimentConfig(
        n_generated_grid=(0, 25, 200), n_real_grid=(10,), seeds=tuple(range(10)),
        n_test=30,
    )
    rows = run_experiment(config)
    means = {
        (c["n_generated"], c["filtered"]): c["mean_map"] for c in aggregate_results(rows)
    }
    benefit = means[(200, False)] - means[(0, False)]
    assert benefit >= 0.05
    gap_small = means[(25, True)] - means[(25, False)]
    gap_large = means[(200, True)] - means[(200, False)]
    assert abs(gap_large) <= abs(gap_small)


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="with a convex low-capacity scorer, dropping scenes always costs "
    "more than the label noise they carry, so the filtered arm trails the "
    "unfiltered arm at small scene counts even under heavy corruption; an "
    "oracle filter shows the same inversion",
)
def test_filtered_beats_unfiltered_at_small_n_under_heavy_corruption():
    config = ExperimentConfig(
        n_generated_grid=(30,), n_real_grid=(10,), seeds=tuple(range(10)),
        corruption=CorruptionConfig(0.3, 0.3, default_domain_shift(16), 0.12),
        n_test=30,
    )
    rows = run_experiment(config)
    unfilt = np.mean([r.mean_ap for r in rows if not r.filtered])
    filt = np.mean([r.mean_ap for r in rows if r.filtered])
    assert filt >= unfilt
