"""Command-line entry point for offline feature extraction.

    gradrep-extract --data <category_dir> --out <dir> \
        --backbone resnext101 --levels 1,2,3 --resize 224
"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractConfig, extract


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gradrep-extract",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--data", required=True, help="category directory "
                        "(train/good, test/<defect>, ground_truth/<defect>)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--backbone", default="resnext101")
    parser.add_argument("--levels", default="1,2,3",
                        help="comma-separated stage numbers, subset of 1-4")
    parser.add_argument("--resize", type=int, default=224)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--random-weights", action="store_true",
                        help="use an untrained backbone (pretrained-features ablation)")
    parser.add_argument("--seed", type=int, default=0,
                        help="init seed, only relevant with --random-weights")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        config = ExtractConfig(
            backbone=args.backbone,
            levels=tuple(int(v) for v in args.levels.split(",") if v),
            resize=args.resize,
            batch_size=args.batch_size,
            random_weights=args.random_weights,
            seed=args.seed,
        )
        manifest = extract(args.data, args.out, config)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"gradrep-extract: {exc}", file=sys.stderr)
        return 2
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
