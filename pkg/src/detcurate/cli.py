"""Command-line surface.

Subcommands: ``eval``, ``fid``, ``fid-filter``, ``pr-filter``,
``layout fit``, ``layout sample``, ``toy run``.

Every subcommand accepts ``--config FILE`` pointing at a flat
``key = value`` text file whose keys are the long flag names (dashes or
underscores); explicit flags override file values and unknown keys are
rejected.  Seeds fall back to the ``DETCURATE_SEED`` environment variable.
Exit codes: 0 success, 1 I/O failure, 2 validation or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import anno, frechet, layout, metrics, prfilter, toyxfer
from ._util import round6

ENV_SEED = "DETCURATE_SEED"
EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def read_config(path: str) -> dict[str, str]:
    """Parse a flat key = value file; blank lines and # comments allowed."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def apply_config(args: argparse.Namespace) -> None:
    """Fill unset options from the config file, if one was given."""
    path = getattr(args, "config", None)
    if not path:
        return
    leaf: argparse.ArgumentParser = args.leaf_parser
    known = {
        a.dest: a for a in leaf._actions if a.dest not in ("help", "config")
    }
    for key, raw in read_config(path).items():
        if key not in known:
            raise CliError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                typ = action.type or str
                try:
                    value = typ(raw)
                except (TypeError, ValueError) as exc:
                    raise CliError(f"config key {key!r}: bad value {raw!r}") from exc
            setattr(args, key, value)


def resolve_seed(args: argparse.Namespace, default: int = 0) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise CliError(f"{ENV_SEED} must be an integer, got {env!r}") from exc
    return default


def _fill(args: argparse.Namespace, **defaults) -> None:
    """Apply hard defaults to options still unset after config merging."""
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _write_or_print(payload: str, out: str | None) -> None:
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        print(payload, end="" if payload.endswith("\n") else "\n")


def cmd_eval(args) -> int:
    _fill(args, iou=0.5, confidence_cut=0.5, coco_map=False)
    gt = anno.load_ground_truth(args.gt)
    dets = anno.load_detections(args.dets, gt)
    report = metrics.evaluate(dets, gt, args.iou, args.confidence_cut)
    payload = metrics.report_to_dict(report)
    if args.coco_map:
        payload["coco_map"] = round6(metrics.coco_style_map(dets, gt))
    _write_or_print(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_fid(args) -> int:
    _fill(args, format="fet")
    real = frechet.load_features(args.real, args.format)
    gen = frechet.load_features(args.generated, args.format)
    d2 = frechet.frechet_distance(frechet.fit_stats(real), frechet.fit_stats(gen))
    print(f"{d2:.6f}")
    return EXIT_OK


def cmd_fid_filter(args) -> int:
    _fill(args, format="fet", passes=1, mode="greedy", threshold=0.0)
    real = frechet.load_features(args.real, args.format)
    gen = frechet.load_features(args.generated, args.format)
    if args.mode == "threshold":
        result = frechet.fid_filter_threshold(gen, real, args.threshold)
    elif args.mode == "greedy":
        result = frechet.fid_filter(gen, real, passes=args.passes)
    else:
        raise CliError(f"unknown filter mode {args.mode!r}")
    frechet.save_features(result.kept, args.out)
    if args.report:
        report = {
            "initial_fid": round6(result.initial_fid),
            "final_fid": round6(result.final_fid),
            "removed_ids": list(result.removed_ids),
            "kept_count": result.kept.n,
            "truncated": result.truncated,
            "trace": [round6(v) for v in result.trace],
        }
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if args.plot:
        from .plots import plot_fid_trace

        plot_fid_trace(list(result.trace), result.initial_fid, args.plot)
    print(
        f"kept {result.kept.n}/{gen.n} records; "
        f"fid {result.initial_fid:.6f} -> {result.final_fid:.6f}"
    )
    return EXIT_OK


def cmd_pr_filter(args) -> int:
    _fill(args, precision_threshold=1.0, recall_threshold=1.0, iou=0.5, jobs=1)
    gt = anno.load_ground_truth(args.gt)
    dets = anno.load_detections(args.dets, gt)
    kept, decisions = prfilter.pr_filter(
        gt, dets, args.precision_threshold, args.recall_threshold, args.iou, jobs=args.jobs
    )
    anno.save_ground_truth(kept, args.out)
    if args.report:
        prfilter.save_decisions(
            decisions, args.report, args.precision_threshold, args.recall_threshold, args.iou
        )
    kept_n = sum(1 for d in decisions if d.kept)
    frac = kept_n / len(decisions) if decisions else 0.0
    print(f"kept {kept_n}/{len(decisions)} images ({frac:.1%})")
    return EXIT_OK


def cmd_layout_fit(args) -> int:
    ds = anno.load_ground_truth(args.gt)
    if args.min_area_fraction is not None:
        before = ds.annotation_count
        ds = anno.filter_small_boxes(ds, args.min_area_fraction)
        print(f"small-box rule removed {before - ds.annotation_count} annotations",
              file=sys.stderr)
    stats = layout.fit_layout(ds)
    payload = json.dumps(layout.layout_stats_to_dict(stats), indent=2) + "\n"
    _write_or_print(payload, args.out)
    return EXIT_OK


def cmd_layout_sample(args) -> int:
    _fill(args, entity_phrase="an object", prompt_template="{n} objects in a scene",
          k_max=30)
    stats = layout.load_layout_stats(args.stats)
    seed = resolve_seed(args)
    instructions = layout.sample_layout(
        stats,
        seed,
        args.n_images,
        args.entity_phrase,
        args.prompt_template,
        style_ref=args.style_ref,
        k_max=args.k_max,
    )
    payload = json.dumps(layout.instructions_to_list(instructions), indent=2) + "\n"
    _write_or_print(payload, args.out)
    return EXIT_OK


def cmd_toy_run(args) -> int:
    _fill(args, n_generated="0,25,50,100,200", n_real="0,10", n_seeds=10,
          p_miss=0.1, p_spur=0.1, noise_sigma=0.15, n_test=50, min_delta=0.0,
          out_dir="toy-results", no_filter=False, no_plot=False)
    seed = resolve_seed(args)
    corruption = toyxfer.CorruptionConfig(
        p_miss=args.p_miss,
        p_spur=args.p_spur,
        domain_shift=toyxfer.default_domain_shift(16),
        noise_sigma=args.noise_sigma,
    )
    config = toyxfer.ExperimentConfig(
        n_generated_grid=tuple(int(v) for v in args.n_generated.split(",")),
        n_real_grid=tuple(int(v) for v in args.n_real.split(",")),
        seeds=tuple(seed + i for i in range(args.n_seeds)),
        use_pr_filter=not args.no_filter,
        corruption=corruption,
        real_noise_sigma=args.noise_sigma,
        n_test=args.n_test,
        min_delta=args.min_delta,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = toyxfer.run_experiment(config)
    toyxfer.results_to_csv(rows, out_dir / "results.csv")
    toyxfer.save_aggregate(rows, out_dir / "summary.json")
    if not args.no_plot:
        from .plots import plot_toy_curves

        plot_toy_curves(rows, out_dir / "curves.svg")
    print(f"wrote {len(rows)} rows to {out_dir / 'results.csv'}")
    for cell in toyxfer.aggregate_results(rows):
        print(
            f"  n_gen={cell['n_generated']:>4} n_real={cell['n_real']:>4} "
            f"filtered={str(cell['filtered']).lower():<5} "
            f"map={cell['mean_map']:.3f} +/- {cell['std_map']:.3f}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detcurate",
        description="Detection metrics, Frechet-distance dataset filters, "
        "layout sampling and a toy transfer experiment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth JSON file")
    p.add_argument("--dets", required=True, help="detections JSON file")
    p.add_argument("--iou", type=float, help="IoU threshold (default 0.5)")
    p.add_argument("--confidence-cut", type=float,
                   help="confidence cut for precision/recall/F1 (default 0.5)")
    p.add_argument("--coco-map", action="store_true", default=None,
                   help="also report mAP averaged over IoU 0.50:0.05:0.95")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--config")
    p.set_defaults(func=cmd_eval, leaf_parser=p)

    p = sub.add_parser("fid", help="squared Frechet distance between two feature files")
    p.add_argument("--real", required=True, help="real-set feature file")
    p.add_argument("--generated", required=True, help="generated-set feature file")
    p.add_argument("--format", choices=["fet", "csv"], help="feature file format (default fet)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_fid, leaf_parser=p)

    p = sub.add_parser("fid-filter", help="leave-one-out distance filter on a feature file")
    p.add_argument("--real", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--out", required=True, help="kept records, FETv1")
    p.add_argument("--format", choices=["fet", "csv"])
    p.add_argument("--passes", type=int, help="greedy passes over the records (default 1)")
    p.add_argument("--mode", choices=["greedy", "threshold"],
                   help="greedy strict-decrease pass (default) or one-shot delta threshold")
    p.add_argument("--threshold", type=float,
                   help="max tolerated leave-one-out improvement in threshold mode")
    p.add_argument("--report", help="write a JSON report of the decisions")
    p.add_argument("--plot", help="render the distance trace to this figure file")
    p.add_argument("--config")
    p.set_defaults(func=cmd_fid_filter, leaf_parser=p)

    p = sub.add_parser("pr-filter", help="keep images whose layout was faithfully realized")
    p.add_argument("--gt", required=True, help="intended ground truth of the generated set")
    p.add_argument("--dets", required=True, help="filtering detector's detections")
    p.add_argument("--precision-threshold", type=float, help="default 1.0")
    p.add_argument("--recall-threshold", type=float, help="default 1.0")
    p.add_argument("--iou", type=float, help="default 0.5")
    p.add_argument("--jobs", type=int, help="worker threads for per-image decisions")
    p.add_argument("--out", required=True, help="kept subset, ground-truth JSON")
    p.add_argument("--report", help="write per-image decisions JSON")
    p.add_argument("--config")
    p.set_defaults(func=cmd_pr_filter, leaf_parser=p)

    p_layout = sub.add_parser("layout", help="fit or sample box layouts")
    layout_sub = p_layout.add_subparsers(dest="layout_command", required=True)

    p = layout_sub.add_parser("fit", help="fit layout statistics from ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--min-area-fraction", type=float,
                   help="drop boxes below this image-area fraction before fitting")
    p.add_argument("--out", help="write stats JSON here instead of stdout")
    p.add_argument("--config")
    p.set_defaults(func=cmd_layout_fit, leaf_parser=p)

    p = layout_sub.add_parser("sample", help="sample grounding instructions")
    p.add_argument("--stats", required=True, help="layout stats JSON from 'layout fit'")
    p.add_argument("--n-images", type=int, required=True)
    p.add_argument("--seed", type=int, help=f"falls back to ${ENV_SEED}, then 0")
    p.add_argument("--entity-phrase", help="phrase attached to every sampled box")
    p.add_argument("--prompt-template", help="prompt with {n} for the box count")
    p.add_argument("--style-ref", help="optional style-reference image path")
    p.add_argument("--k-max", type=int, help="cap on boxes per image (default 30)")
    p.add_argument("--out", help="write instructions JSON here instead of stdout")
    p.add_argument("--config")
    p.set_defaults(func=cmd_layout_sample, leaf_parser=p)

    p_toy = sub.add_parser("toy", help="synthetic transfer-learning experiment")
    toy_sub = p_toy.add_subparsers(dest="toy_command", required=True)

    p = toy_sub.add_parser("run", help="run the experiment grid, write CSV/JSON/figure")
    p.add_argument("--seed", type=int, help=f"base seed; falls back to ${ENV_SEED}, then 0")
    p.add_argument("--n-generated", help="comma list of pretraining set sizes")
    p.add_argument("--n-real", help="comma list of fine-tuning set sizes")
    p.add_argument("--n-seeds", type=int, help="replicates per cell (default 10)")
    p.add_argument("--p-miss", type=float, help="per-object miss probability (default 0.1)")
    p.add_argument("--p-spur", type=float, help="per-object phantom probability (default 0.1)")
    p.add_argument("--noise-sigma", type=float, help="feature noise (default 0.15)")
    p.add_argument("--n-test", type=int, help="test scenes per seed (default 50)")
    p.add_argument("--min-delta", type=float,
                   help="improvement margin for plateau/early-stop (default 0)")
    p.add_argument("--no-filter", action="store_true", default=None, help="skip the filtered arms")
    p.add_argument("--no-plot", action="store_true", default=None, help="skip the figure")
    p.add_argument("--out-dir", help="output directory (default toy-results)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_toy_run, leaf_parser=p)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_config(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
