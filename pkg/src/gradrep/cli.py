"""Command-line entry point.

Subcommands::

    gradrep run       full pipeline on one manifest, artifacts to --out
    gradrep score-only  score a test split with saved model + repository
    gradrep fewshot   few-shot protocol over a grid of k values
    gradrep kfold     cross-validation over the normal samples
    gradrep ablate    selection x mapping ablation matrix

Exit codes: 0 success, 2 input/configuration error, 3 training error.
``GRADREP_THREADS`` caps per-sample scoring parallelism (default 1).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .artifacts import (
    load_model_snapshot,
    load_repository_snapshot,
    save_model_snapshot,
    save_repository_snapshot,
    write_attention_outputs,
    write_report_json,
    write_scores_csv,
)
from .config import RunConfig
from .errors import (
    DataError,
    FormatError,
    GradrepError,
    ManifestError,
    MetricError,
    TrainingError,
)
from .evaluation import evaluate_pipeline, few_shot, kfold, run_category
from .manifest import load_manifest

_MODULE_OF = {
    ManifestError: "ingest",
    FormatError: "ingest",
    DataError: "ingest",
    TrainingError: "learner",
    MetricError: "eval",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed for all RNG streams")
    parser.add_argument("--selection", choices=["gradient", "random", "all"], default="gradient")
    parser.add_argument(
        "--no-discriminative", action="store_true",
        help="skip the mapping network; score raw repository features",
    )
    parser.add_argument("--image-score", choices=["max", "mean-topk"], default="max")
    parser.add_argument("--detach-center", action="store_true",
                        help="treat the batch center as a constant in the loss gradient")
    parser.add_argument("--eta", type=float, default=0.8, help="early-stop loss ratio")
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--max-epochs", type=int, default=200)
    parser.add_argument("--hidden", type=int, default=1024)
    parser.add_argument("--cf", type=int, default=512, help="mapped feature dimension")
    parser.add_argument("--sigma", type=float, default=4.0, help="attention smoothing sigma")


def _config_from(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        selection=args.selection,
        image_score=args.image_score,
        no_discriminative=args.no_discriminative,
        detach_center=args.detach_center,
        eta=args.eta,
        learning_rate=args.lr,
        batch_size=args.batch,
        max_epochs=args.max_epochs,
        hidden=args.hidden,
        c_f=args.cf,
        sigma=args.sigma,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradrep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline: repository, training, scoring, report")
    run.add_argument("--manifest", required=True)
    run.add_argument("--out", required=True)
    _add_config_flags(run)

    score = sub.add_parser("score-only", help="score with existing snapshots")
    score.add_argument("--manifest", required=True)
    score.add_argument("--out", required=True)
    score.add_argument("--model", help="model snapshot (omit with --no-discriminative)")
    score.add_argument("--repository", required=True)
    _add_config_flags(score)

    few = sub.add_parser("fewshot", help="few-shot protocol over k train images")
    few.add_argument("--manifest", required=True)
    few.add_argument("--out", required=True)
    few.add_argument("--fewshot-k", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    few.add_argument("--num-seeds", type=int, default=5)
    _add_config_flags(few)

    kf = sub.add_parser("kfold", help="k-fold cross-validation over normal samples")
    kf.add_argument("--manifest", required=True)
    kf.add_argument("--out", required=True)
    kf.add_argument("--folds", type=int, default=5)
    _add_config_flags(kf)

    ab = sub.add_parser("ablate", help="selection x mapping ablation matrix")
    ab.add_argument("--manifest", required=True)
    ab.add_argument("--out", required=True)
    _add_config_flags(ab)

    return parser


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    run = run_category(manifest, config)
    save_repository_snapshot(out / "repository.zip", run.repository)
    if run.params is not None:
        save_model_snapshot(out / "model.zip", run.params, config.train_config())
    write_scores_csv(out / "scores.csv", run.report)
    write_attention_outputs(out / "attention", run.results)
    write_report_json(out / "report.json", run.report.to_dict())
    print(f"{manifest.category}: image AUROC {run.report.image_auroc:.4f}"
          + (f", pixel AUROC {run.report.pixel_auroc:.4f}" if run.report.pixel_auroc is not None else ""))
    return 0


def cmd_score_only(args: argparse.Namespace) -> int:
    config = _config_from(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    repository = load_repository_snapshot(args.repository)
    params = None
    if not args.no_discriminative:
        if not args.model:
            raise ValueError("score-only needs --model unless --no-discriminative is set")
        params, _ = load_model_snapshot(args.model)

    run = evaluate_pipeline(manifest, repository, params, None, config)
    write_scores_csv(out / "scores.csv", run.report)
    write_attention_outputs(out / "attention", run.results)
    write_report_json(out / "report.json", run.report.to_dict())
    print(f"{manifest.category}: image AUROC {run.report.image_auroc:.4f}")
    return 0


def cmd_fewshot(args: argparse.Namespace) -> int:
    config = _config_from(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed + i for i in range(args.num_seeds)]

    rows = []
    for k in args.fewshot_k:
        reports, mean = few_shot(manifest, k, seeds, config)
        rows.append({"k": k, "mean_image_auroc": mean,
                     "per_seed": [r.image_auroc for r in reports]})
        print(f"k={k:>3}: mean image AUROC {mean:.4f}")
    payload = {
        "category": manifest.category,
        "seeds": seeds,
        "results": rows,
        "config_fingerprint": config.fingerprint(),
    }
    write_report_json(out / "fewshot.json", payload)
    csv_lines = ["k,mean_image_auroc"] + [f"{r['k']},{r['mean_image_auroc']!r}" for r in rows]
    (out / "fewshot.csv").write_text("\n".join(csv_lines) + "\n")
    return 0


def cmd_kfold(args: argparse.Namespace) -> int:
    config = _config_from(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    reports, mean = kfold(manifest, args.folds, args.seed, config)
    for i, rep in enumerate(reports):
        print(f"fold {i}: image AUROC {rep.image_auroc:.4f}")
    print(f"mean over {args.folds} folds: {mean:.4f}")
    payload = {
        "category": manifest.category,
        "folds": args.folds,
        "seed": args.seed,
        "per_fold": [r.to_dict() for r in reports],
        "mean_image_auroc": mean,
        "config_fingerprint": config.fingerprint(),
    }
    write_report_json(out / "kfold.json", payload)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config_from(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    combos = [
        ("gradient", False), ("random", False), ("gradient", True), ("random", True),
    ]
    rows = []
    print(f"{'selection':>10} {'mapping':>9} {'image AUROC':>12} {'pixel AUROC':>12}")
    for selection, no_disc in combos:
        cfg = replace(config, selection=selection, no_discriminative=no_disc)
        run = run_category(manifest, cfg)
        rows.append({
            "selection": selection,
            "discriminative": not no_disc,
            "image_auroc": run.report.image_auroc,
            "pixel_auroc": run.report.pixel_auroc,
        })
        pix = f"{run.report.pixel_auroc:.4f}" if run.report.pixel_auroc is not None else "-"
        mapping = "trained" if not no_disc else "identity"
        print(f"{selection:>10} {mapping:>9} {run.report.image_auroc:>12.4f} {pix:>12}")
    payload = {
        "category": manifest.category,
        "seed": config.seed,
        "rows": rows,
        "config_fingerprint": config.fingerprint(),
    }
    write_report_json(out / "ablation.json", payload)
    return 0


_COMMANDS = {
    "run": cmd_run,
    "score-only": cmd_score_only,
    "fewshot": cmd_fewshot,
    "kfold": cmd_kfold,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TrainingError as exc:
        print(f"gradrep: learner: {exc}", file=sys.stderr)
        return 3
    except GradrepError as exc:
        module = _MODULE_OF.get(type(exc), "pipeline")
        print(f"gradrep: {module}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"gradrep: input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
