"""
Shared fixtures for the hlmax test suite
"""
import pytest

from hlmax.analysis.catalog import make_weight
from hlmax.analysis.spaces import parse_space
from hlmax.config import QuadratureConfig


@pytest.fixture(scope="session")
def real_line():
    return parse_space("real-line")


@pytest.fixture(scope="session")
def plane():
    return parse_space("euclidean:2")


@pytest.fixture(scope="session")
def affine_left():
    return parse_space("affine-left")


@pytest.fixture(scope="session")
def affine_right():
    return parse_space("affine-right")


@pytest.fixture(scope="session")
def exact_cfg():
    """Default tolerances, single worker"""
    return QuadratureConfig(threads=1)


@pytest.fixture(scope="session")
def fast_cfg():
    """Small sample counts for Monte Carlo paths"""
    return QuadratureConfig(mc_samples=4000, field_samples=128, threads=1)


@pytest.fixture(scope="session")
def exp_weight():
    return make_weight("exp")
