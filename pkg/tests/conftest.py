"""Shared fixtures: a small synthetic dataset and a briefly trained model.

Everything expensive is session-scoped and treated as read-only by the
tests that consume it. The training run here is a smoke-scale run (45
iterations on 32x32 pairs); quality assertions about trained behavior
belong to the acceptance module, not to these fixtures.
"""

import pytest

from condreg.condnet import default_config, load_checkpoint
from condreg.datagen import PairSpec, generate_pair, make_dataset
from condreg.trainer import TrainConfig, train

TINY_SHAPE = (32, 32)


def tiny_spec() -> PairSpec:
    return PairSpec(shape=TINY_SHAPE, n_blobs=4, smoothness=6.0, max_disp=3.5)


@pytest.fixture(scope="session")
def pair_spec():
    return tiny_spec()


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, pair_spec):
    path = tmp_path_factory.mktemp("data") / "tiny"
    make_dataset(12, pair_spec, path, seed0=100)
    return path


@pytest.fixture(scope="session")
def sample_record(pair_spec):
    return generate_pair(7, pair_spec)


@pytest.fixture(scope="session")
def trained_run(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("runs") / "tiny_model"
    cfg = TrainConfig(iterations=45, checkpoint_every=20, seed=3)
    summary = train(cfg, dataset_dir, out, model_config=default_config("cir_dm", dims=2))
    return out, summary


@pytest.fixture(scope="session")
def trained_model(trained_run):
    _, summary = trained_run
    return load_checkpoint(summary["best_checkpoint"])
