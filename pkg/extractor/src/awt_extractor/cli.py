"""awt-extract: build evaluable task manifests from image folders."""

from __future__ import annotations

import argparse
import sys

from .errors import ExtractorError
from .extract import ExtractionConfig, build_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="awt-extract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="extract a folder-per-class dataset into a manifest")
    p.add_argument("--data", required=True, help="dataset root: one subdirectory per class")
    p.add_argument("--descriptions", required=True, help="gen-descriptions output JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model", default="proj:64", help="encoder id: proj:<dim> or hf:<name>")
    p.add_argument("--n-views", type=int, default=50)
    p.add_argument("--scale-min", type=float, default=0.5)
    p.add_argument("--scale-max", type=float, default=1.0)
    p.add_argument("--flip-prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExtractionConfig(
        model=args.model,
        n_views=args.n_views,
        scale=(args.scale_min, args.scale_max),
        flip_probability=args.flip_prob,
        seed=args.seed,
    )
    try:
        manifest = build_manifest(args.data, args.descriptions, cfg, args.out)
    except ExtractorError as exc:
        print(f"awt-extract: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"awt-extract: {exc}", file=sys.stderr)
        return 2
    print(manifest)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
