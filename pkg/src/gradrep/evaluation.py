"""AUROC metrics and the evaluation protocols built on them.

``run_category`` is the whole pipeline for one dataset category:
build the repository from the train split, train the mapping, score
the test split, and compute image-level (and, when ground-truth masks
exist, pixel-level) AUROC. ``few_shot`` and ``kfold`` re-slice the
manifest and delegate to it.

AUROC is the Mann-Whitney statistic, computed from average ranks so
ties contribute 1/2. Ranks are half-integers and their sums are exact
in float64, which makes the result identical to an explicit pairwise
count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .config import RunConfig
from .errors import MetricError
from .learner import MappedRepository, MlpParams, TrainHistory, map_repository, train
from .manifest import DatasetManifest, SampleRecord, load_mask
from .scorer import AnomalyResult, load_fused_features, score_sample
from .selector import Repository, build_repository
from .seeding import stream_rng

THREADS_ENV = "GRADREP_THREADS"


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Probability that a random positive outranks a random negative.

    Equals (concordant pairs + 0.5 * tied pairs) / (positives * negatives).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and the same length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = ranks[labels].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pixel_auroc(
    attention_maps: Sequence[np.ndarray], masks: Sequence[np.ndarray | None]
) -> float:
    """AUROC over the pooled pixels of the whole test set."""
    if len(attention_maps) != len(masks):
        raise ValueError("one mask per attention map required")
    scores: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for i, (att, mask) in enumerate(zip(attention_maps, masks)):
        if mask is None:
            raise MetricError(f"missing ground-truth mask for test sample {i}")
        att = np.asarray(att)
        mask = np.asarray(mask, dtype=bool)
        if att.shape != mask.shape:
            raise MetricError(
                f"attention map shape {att.shape} does not match mask shape {mask.shape}"
            )
        scores.append(att.ravel())
        labels.append(mask.ravel())
    return auroc(np.concatenate(scores), np.concatenate(labels))


@dataclass
class EvalReport:
    category: str
    image_auroc: float
    pixel_auroc: float | None
    sample_scores: list[dict]
    config_fingerprint: str
    seed: int
    repository_size: int
    train_epochs: int | None
    train_stop_reason: str | None

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "image_auroc": self.image_auroc,
            "pixel_auroc": self.pixel_auroc,
            "sample_scores": self.sample_scores,
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
            "repository_size": self.repository_size,
            "train_epochs": self.train_epochs,
            "train_stop_reason": self.train_stop_reason,
        }


@dataclass
class CategoryRun:
    """Everything produced by one pipeline run, for callers that persist artifacts."""

    report: EvalReport
    repository: Repository
    mapped: MappedRepository
    params: MlpParams | None
    history: TrainHistory | None
    results: list[AnomalyResult]


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _score_test_set(
    manifest: DatasetManifest,
    params: MlpParams | None,
    mapped: MappedRepository,
    config: RunConfig,
) -> list[AnomalyResult]:
    records = manifest.test_records

    def work(record: SampleRecord) -> AnomalyResult:
        return score_sample(
            record, params, mapped, manifest,
            sigma=config.sigma, image_score_mode=config.image_score,
        )

    threads = _thread_count()
    if threads == 1:
        return [work(r) for r in records]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # executor.map preserves input order, so results come back in
        # manifest order no matter which thread finishes first.
        return list(pool.map(work, records))


def _test_masks(manifest: DatasetManifest) -> list[np.ndarray] | None:
    """Ground-truth masks for the test split, or None if the manifest has none.

    Records without a mask file are treated as all-normal (zero mask); an
    anomalous record without a mask would poison the pixel metric, so that
    raises instead.
    """
    records = manifest.test_records
    if not any(r.mask_path is not None for r in records):
        return None
    masks: list[np.ndarray] = []
    for record in records:
        if record.mask_path is not None:
            masks.append(load_mask(record, manifest))
        elif record.label == "normal":
            masks.append(np.zeros((manifest.image_height, manifest.image_width), dtype=bool))
        else:
            raise MetricError(f"anomalous test record {record.id!r} has no ground-truth mask")
    return masks


def evaluate_pipeline(
    manifest: DatasetManifest,
    repository: Repository,
    params: MlpParams | None,
    history: TrainHistory | None,
    config: RunConfig,
) -> CategoryRun:
    """Score the test split against a ready repository/mapping and report metrics."""
    mapped = map_repository(params, repository)
    results = _score_test_set(manifest, params, mapped, config)
    labels = [r.label == "anomalous" for r in manifest.test_records]
    image_auroc = auroc([res.image_score for res in results], labels)

    masks = _test_masks(manifest)
    pix = pixel_auroc([res.attention_map for res in results], masks) if masks else None

    report = EvalReport(
        category=manifest.category,
        image_auroc=image_auroc,
        pixel_auroc=pix,
        sample_scores=[
            {"id": rec.id, "label": rec.label, "image_score": res.image_score}
            for rec, res in zip(manifest.test_records, results)
        ],
        config_fingerprint=config.fingerprint(),
        seed=config.seed,
        repository_size=len(repository),
        train_epochs=history.stopped_epoch if history else None,
        train_stop_reason=history.stop_reason if history else None,
    )
    return CategoryRun(report, repository, mapped, params, history, results)


def run_category(manifest: DatasetManifest, config: RunConfig) -> CategoryRun:
    """Repository -> mapping -> scores -> metrics, reproducible from one seed."""
    train_records = manifest.train_records
    fused = ((r.id, load_fused_features(r, manifest)) for r in train_records)
    repository = build_repository(fused, config.seed, config.selection)

    params: MlpParams | None = None
    history: TrainHistory | None = None
    if not config.no_discriminative:
        params, history = train(repository, config.train_config())
    return evaluate_pipeline(manifest, repository, params, history, config)


def _with_samples(manifest: DatasetManifest, samples: list[SampleRecord]) -> DatasetManifest:
    return DatasetManifest(
        category=manifest.category,
        image_height=manifest.image_height,
        image_width=manifest.image_width,
        levels=list(manifest.levels),
        samples=samples,
        metadata=dict(manifest.metadata),
    )


def few_shot(
    manifest: DatasetManifest,
    k: int,
    seeds: Sequence[int],
    config: RunConfig,
) -> tuple[list[EvalReport], float]:
    """Evaluate with only k training images, once per seed.

    Each seed subsamples k train records uniformly without replacement and
    runs the full pipeline with that seed as master. Returns the per-seed
    reports and their mean image AUROC.
    """
    train_records = manifest.train_records
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(train_records):
        raise ValueError(f"k={k} exceeds the {len(train_records)} available train samples")
    reports: list[EvalReport] = []
    for seed in seeds:
        rng = stream_rng(seed, "fewshot")
        chosen = sorted(rng.choice(len(train_records), size=k, replace=False).tolist())
        samples = [train_records[i] for i in chosen] + manifest.test_records
        run = run_category(_with_samples(manifest, samples), replace(config, seed=seed))
        reports.append(run.report)
    mean = float(np.mean([r.image_auroc for r in reports]))
    return reports, mean


def kfold(
    manifest: DatasetManifest,
    folds: int,
    seed: int,
    config: RunConfig,
) -> tuple[list[EvalReport], float]:
    """Cross-validate over the normal samples.

    All normal records (whatever split they came from) are shuffled once
    with the given seed and partitioned into ``folds`` disjoint groups.
    Fold i trains on the other groups' normals and tests on its own normals
    plus every anomalous record.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    normals = [s for s in manifest.samples if s.label == "normal"]
    anomalous = [s for s in manifest.samples if s.label == "anomalous"]
    if len(normals) < folds:
        raise ValueError(f"need at least {folds} normal samples, have {len(normals)}")

    order = stream_rng(seed, "kfold").permutation(len(normals))
    groups = np.array_split(order, folds)

    reports: list[EvalReport] = []
    for group in groups:
        held_out = set(group.tolist())
        samples = [
            replace(normals[i], split="train", mask_path=None)
            for i in range(len(normals))
            if i not in held_out
        ]
        samples += [replace(normals[i], split="test") for i in sorted(held_out)]
        samples += [replace(a, split="test") for a in anomalous]
        run = run_category(_with_samples(manifest, samples), replace(config, seed=seed))
        reports.append(run.report)
    mean = float(np.mean([r.image_auroc for r in reports]))
    return reports, mean
