import numpy as np
import pytest

from joint_pruner.arch import reference_network
from joint_pruner.child import ChildModel, synthetic_shapes
from joint_pruner.controller import ControllerConfig

from .specs import block_pair_spec, small_spec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spec():
    return small_spec()


@pytest.fixture
def pair_spec():
    return block_pair_spec()


@pytest.fixture
def reference_spec():
    return reference_network(32, 1)


@pytest.fixture
def tiny_controller():
    return ControllerConfig(h_dim=6, e_dim=5)


@pytest.fixture
def micro_data():
    return synthetic_shapes(24, 12, image_size=8, seed=3)


@pytest.fixture
def micro_model(spec, rng):
    return ChildModel.initialize(spec, 3, rng)
