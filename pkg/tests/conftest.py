import pytest

from gradrep.synthetic import SyntheticSpec, write_dataset

SMALL_SPEC = SyntheticSpec(
    channels=8, height=12, width=12, n_train=6, n_test_normal=4, n_test_anomalous=4,
    vary_channels=4, image_scale=2,
)


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("small_synth")
    write_dataset(out, SMALL_SPEC, seed=123)
    return out


@pytest.fixture(scope="session")
def dataset_cache(tmp_path_factory):
    """Factory caching synthetic datasets by (spec, seed) across tests."""
    root = tmp_path_factory.mktemp("synth_cache")
    produced: dict[tuple, object] = {}

    def get(spec: SyntheticSpec, seed: int):
        key = (spec, seed)
        if key not in produced:
            out = root / f"ds_{abs(hash(key)):x}"
            produced[key] = write_dataset(out, spec, seed)
        return produced[key]

    return get
