#!/usr/bin/env python3
"""Generate a synthetic feature-map dataset on disk.

Writes tensor files, ground-truth masks, and a manifest that the
``gradrep`` CLI consumes directly:

    python scripts/make_synthetic_dataset.py --out data/synth --seed 0
    gradrep run --manifest data/synth/manifest.json --out results/synth
"""

import argparse

from gradrep.synthetic import SyntheticSpec, write_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--channels", type=int, default=32)
    parser.add_argument("--size", type=int, default=28, help="feature map height/width")
    parser.add_argument("--train", type=int, default=40)
    parser.add_argument("--test-normal", type=int, default=20)
    parser.add_argument("--test-anomalous", type=int, default=20)
    parser.add_argument("--offset-sigma", type=float, default=3.0,
                        help="patch offset in units of the field std")
    parser.add_argument("--perturb-scale", type=float, default=1.5)
    args = parser.parse_args()

    spec = SyntheticSpec(
        channels=args.channels,
        height=args.size,
        width=args.size,
        n_train=args.train,
        n_test_normal=args.test_normal,
        n_test_anomalous=args.test_anomalous,
        offset_sigma=args.offset_sigma,
        perturb_scale=args.perturb_scale,
    )
    manifest = write_dataset(args.out, spec, args.seed)
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()
