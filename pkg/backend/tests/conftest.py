import pytest

from solver.model import ModelParams
from solver.spectral_core import GridSpec
from tests.helpers import taylor_green_state


@pytest.fixture
def grid16():
    return GridSpec(n=16)


@pytest.fixture
def grid32():
    return GridSpec(n=32)


@pytest.fixture
def tg_state(grid32):
    return taylor_green_state(grid32)


@pytest.fixture
def full_params():
    return ModelParams(a=0.0, mu=1.0, nu=0.0, alpha=1.0, b=1.0, rotation_mode="full")


@pytest.fixture
def corotation_params():
    return ModelParams.corotation_inviscid(a=1.0, mu=1.0)


@pytest.fixture
def checks_tree(tmp_path):
    """An empty checks directory with one folder per check set."""
    root = tmp_path / "checks"
    for name in ("TAU_IDENTITY", "EULER", "ENERGY_CONSERVATION", "MONOTONE_ENERGY", "DECAY"):
        (root / name).mkdir(parents=True)
    return root
