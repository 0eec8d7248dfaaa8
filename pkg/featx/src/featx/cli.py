"""featx command line: `featx extract --in DIR --out FILE.fet [--batch N]`.

Exit codes: 0 success, 1 I/O failure, 2 when the directory holds no
decodable image (or on usage errors).
"""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionError, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featx",
        description="Extract image embeddings into the FETv1 feature-file format.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="embed a directory of images")
    p.add_argument("--in", dest="input_dir", required=True, help="image directory")
    p.add_argument("--out", required=True, help="output feature file (FETv1)")
    p.add_argument("--batch", type=int, default=8, help="inference batch size")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the untrained-backbone fallback")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = extract(args.input_dir, args.out, batch=args.batch, seed=args.seed)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {len(manifest.images)} records "
        f"(dim {manifest.dim}, model {manifest.model}) to {args.out}"
    )
    if manifest.skipped:
        print(f"skipped {len(manifest.skipped)} undecodable files", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
