import numpy as np
import pytest

from morphcf import synth
from morphcf.dataio import Dataset
from morphcf.gateway import PredictionGateway


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset") / "ds"
    synth.generate_dataset(100, 1, out)
    return out


@pytest.fixture(scope="session")
def dataset(dataset_dir):
    return Dataset.load(dataset_dir)


@pytest.fixture(scope="session")
def gateway(dataset):
    c = dataset.manifest.constants
    return PredictionGateway(alpha=c["alpha"], tau_c=c["tau_c"])


@pytest.fixture(scope="session")
def cohorts(dataset):
    """(label-1 ids, label-0 ids) in dataset order."""
    ones = [r.id for r in dataset.records if r.predicted_label == 1]
    zeros = [r.id for r in dataset.records if r.predicted_label == 0]
    return ones, zeros


def make_phantom(seed: int, subject_id: str = "p", noise_sigma=synth.NOISE_SIGMA,
                 frames: int = 1):
    """One deterministic phantom volume+map pair for unit tests."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    params = synth.sample_params(rng, noise_sigma=noise_sigma,
                                 noise_seed=int(rng.integers(0, 2**32)))
    return synth.render_phantom(params, subject_id, frames=frames)
