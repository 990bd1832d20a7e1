"""
Shared fixtures: seeded generators, reference configurations and small
trained networks (a few Adam steps, enough to exercise inference paths).
"""

import pytest

from sbgp.models.distributions import make_rng
from sbgp.models.sbgp_model import reference_params, sample
from sbgp.nbe.family import BgpFamily, SbgpFamily
from sbgp.nbe.prior import BgpPriorConfig, PriorConfig
from sbgp.nbe.serialization import save_weights
from sbgp.nbe.trainer import TrainConfig, train

TINY_TRAINING = dict(num_steps=3, batch_size=2, validation_size=2, eval_every=1)


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def theta1():
    return reference_params(1)


@pytest.fixture
def theta2():
    return reference_params(2)


@pytest.fixture
def theta3():
    return reference_params(3)


@pytest.fixture(scope="session")
def sbgp_family():
    return SbgpFamily(PriorConfig(n_range=(100, 120)))


@pytest.fixture(scope="session")
def bgp_family():
    return BgpFamily(BgpPriorConfig(n_range=(100, 120)))


@pytest.fixture(scope="session")
def trained_weights(sbgp_family):
    return train(sbgp_family, TrainConfig(**TINY_TRAINING), make_rng(7), progress=False).weights


@pytest.fixture(scope="session")
def penalized_weights(sbgp_family):
    cfg = TrainConfig(loss_lambda=0.5, **TINY_TRAINING)
    return train(sbgp_family, cfg, make_rng(8), progress=False).weights


@pytest.fixture(scope="session")
def bgp_weights(bgp_family):
    return train(bgp_family, TrainConfig(**TINY_TRAINING), make_rng(9), progress=False).weights


@pytest.fixture
def weights_file(tmp_path, trained_weights):
    return save_weights(trained_weights, tmp_path / "sbgp_weights.json")


@pytest.fixture
def sbgp_sample(theta2):
    return sample(theta2, 150, make_rng(3))
