import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradrep.config import RunConfig
from gradrep.errors import MetricError
from gradrep.evaluation import auroc, few_shot, kfold, pixel_auroc, run_category
from gradrep.manifest import load_manifest
from gradrep.synthetic import SyntheticSpec, write_dataset

from oracles import pairwise_auroc

SMALL_SPEC = SyntheticSpec(
    channels=8, height=12, width=12, n_train=6, n_test_normal=4, n_test_anomalous=4,
    image_scale=2,
)

SMALL_CONFIG = RunConfig(hidden=32, c_f=16, batch_size=64, max_epochs=20, sigma=2.0)


@pytest.fixture(scope="module")
def small_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    return load_manifest(write_dataset(out, SMALL_SPEC, seed=123))


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([1, 2, 3, 10, 11], [False, False, False, True, True]) == 1.0

    def test_all_tied_scores(self):
        assert auroc([5.0] * 6, [True, False, True, False, False, True]) == 0.5

    def test_hand_counted_value(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = [False, False, True, True]
        assert auroc(scores, labels) == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(MetricError):
            auroc([1.0, 2.0], [True, True])

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(2, 200))
    def test_matches_pairwise_oracle_exactly(self, seed, n):
        rng = np.random.default_rng(seed)
        # quantized scores force plenty of ties
        scores = rng.integers(0, 6, size=n).astype(np.float64) / 4.0
        labels = rng.random(n) < 0.5
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        assert auroc(scores, labels) == pairwise_auroc(scores, labels)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.standard_normal(40)
        labels = rng.random(40) < 0.4
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        base = auroc(scores, labels)
        assert auroc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert auroc(3.0 * scores + 11.0, labels) == pytest.approx(base, abs=1e-12)


class TestPixelAuroc:
    def test_attention_equal_to_masks_is_perfect(self):
        masks = [np.zeros((4, 4), bool), np.zeros((4, 4), bool)]
        masks[1][1:3, 1:3] = True
        attention = [m.astype(float) for m in masks]
        assert pixel_auroc(attention, masks) == 1.0

    def test_constant_attention_is_chance(self):
        masks = [np.zeros((4, 4), bool)]
        masks[0][0, 0] = True
        assert pixel_auroc([np.full((4, 4), 0.7)], masks) == 0.5

    def test_single_image_hand_ranking(self):
        mask = np.array([[True, False], [False, False]])
        attention = np.array([[0.9, 0.1], [0.2, 0.3]])
        assert pixel_auroc([attention], [mask]) == 1.0

    def test_missing_mask_rejected(self):
        with pytest.raises(MetricError):
            pixel_auroc([np.zeros((2, 2))], [None])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(MetricError):
            pixel_auroc([np.zeros((2, 2))], [np.zeros((3, 3), bool)])


class TestRunCategory:
    def test_produces_valid_report(self, small_manifest):
        run = run_category(small_manifest, SMALL_CONFIG)
        rep = run.report
        assert 0.0 <= rep.image_auroc <= 1.0
        assert rep.pixel_auroc is not None and 0.0 <= rep.pixel_auroc <= 1.0
        assert len(rep.sample_scores) == 8
        assert rep.repository_size == len(run.repository)
        assert [s["id"] for s in rep.sample_scores] == [
            r.id for r in small_manifest.test_records
        ]

    def test_same_seed_identical_reports(self, small_manifest):
        r1 = run_category(small_manifest, SMALL_CONFIG).report
        r2 = run_category(small_manifest, SMALL_CONFIG).report
        assert r1.to_dict() == r2.to_dict()

    def test_plain_memory_bank_ablation_runs(self, small_manifest):
        from dataclasses import replace

        config = replace(SMALL_CONFIG, selection="all", no_discriminative=True)
        run = run_category(small_manifest, config)
        assert run.params is None and run.history is None
        # repository holds every position of every train image
        expected = SMALL_SPEC.n_train * SMALL_SPEC.height * SMALL_SPEC.width
        assert run.report.repository_size == expected

    def test_memorized_image_scores_zero_under_identity(self, small_manifest, tmp_path):
        # a test image that is a byte-copy of a train image, with every
        # position in the repository and the identity mapping, is at
        # distance zero everywhere
        import json
        import shutil
        from dataclasses import replace

        src_dir = small_manifest.samples[0].tensor_paths["0"].parent.parent
        dup = tmp_path / "dup"
        shutil.copytree(src_dir, dup)
        doc = json.loads((dup / "manifest.json").read_text())
        train0 = next(s for s in doc["samples"] if s["split"] == "train")
        doc["samples"].append({
            "id": "memorized", "split": "test", "label": "normal",
            "tensors": dict(train0["tensors"]),
        })
        (dup / "manifest.json").write_text(json.dumps(doc))
        manifest = load_manifest(dup / "manifest.json")

        config = replace(SMALL_CONFIG, selection="all", no_discriminative=True)
        run = run_category(manifest, config)
        memorized = next(r for r in run.results if r.sample_id == "memorized")
        np.testing.assert_array_equal(memorized.pixel_map, 0.0)
        assert memorized.image_score == 0.0


class TestFewShot:
    def test_k_equal_full_train_size_matches_run_category(self, small_manifest):
        from dataclasses import replace

        reports, mean = few_shot(small_manifest, k=6, seeds=[3], config=SMALL_CONFIG)
        direct = run_category(small_manifest, replace(SMALL_CONFIG, seed=3)).report
        assert reports[0].to_dict() == direct.to_dict()
        assert mean == reports[0].image_auroc

    def test_k_one_still_builds_repository(self, small_manifest):
        reports, _ = few_shot(small_manifest, k=1, seeds=[0, 1], config=SMALL_CONFIG)
        assert all(r.repository_size >= 1 for r in reports)

    def test_invalid_k_rejected(self, small_manifest):
        with pytest.raises(ValueError):
            few_shot(small_manifest, k=0, seeds=[0], config=SMALL_CONFIG)
        with pytest.raises(ValueError):
            few_shot(small_manifest, k=999, seeds=[0], config=SMALL_CONFIG)


class TestKfold:
    def test_partition_contract(self, small_manifest):
        # 10 normals (6 train + 4 test normals), folds of 2 cover all exactly once
        reports, mean = kfold(small_manifest, folds=5, seed=9, config=SMALL_CONFIG)
        assert len(reports) == 5
        normal_ids = {s.id for s in small_manifest.samples if s.label == "normal"}
        tested: list[str] = []
        for rep in reports:
            fold_normal_ids = [
                s["id"] for s in rep.sample_scores if s["label"] == "normal"
            ]
            assert len(fold_normal_ids) == 2
            tested += fold_normal_ids
            anomalous = [s["id"] for s in rep.sample_scores if s["label"] == "anomalous"]
            assert len(anomalous) == SMALL_SPEC.n_test_anomalous
        assert sorted(tested) == sorted(normal_ids)
        assert 0.0 <= mean <= 1.0

    def test_two_fold_symmetric_split(self, small_manifest):
        reports, _ = kfold(small_manifest, folds=2, seed=1, config=SMALL_CONFIG)
        assert len(reports) == 2

    def test_too_few_normals_rejected(self, small_manifest):
        with pytest.raises(ValueError):
            kfold(small_manifest, folds=11, seed=0, config=SMALL_CONFIG)
