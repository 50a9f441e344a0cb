import pytest

from beambench.dataset import DatasetReader, synthesize_records, write_dataset
from beambench.scenario import ScenarioConfig


@pytest.fixture(scope="session")
def full_ds(tmp_path_factory):
    """Small all-modality dataset shared by read-only tests."""
    root = tmp_path_factory.mktemp("fullds") / "data"
    cfg = ScenarioConfig(num_samples=60, global_seed=7, blockage_prob=0.1)
    write_dataset(synthesize_records(cfg), root, cfg.num_elements, cfg.num_beams, cfg.noise_var)
    return root, cfg


@pytest.fixture(scope="session")
def full_reader(full_ds):
    root, _ = full_ds
    return DatasetReader(root)
