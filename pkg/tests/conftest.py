import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from l1ds import experiments as ex  # noqa: E402
from l1ds.config import ExperimentConfig  # noqa: E402
from l1ds.sim import nominal_target  # noqa: E402

N_GRID = 1001


class FittedShape:
    """Default-config model for one synthetic shape, with its nominal target."""

    def __init__(self, shape, n=N_GRID, seed=0):
        self.cfg = ExperimentConfig.from_dict({"shape": {"name": shape},
                                               "preprocessing": {"n": n}})
        self.model, self.demos, self.report = ex.build_model(self.cfg, seed)
        self.z_star0, _ = ex.start_states(self.cfg, self.demos)
        self.n = n
        self.target = nominal_target(self.model, self.z_star0, n)


_CACHE = {}


def fitted(shape, n=N_GRID, seed=0) -> FittedShape:
    key = (shape, n, seed)
    if key not in _CACHE:
        _CACHE[key] = FittedShape(shape, n, seed)
    return _CACHE[key]


@pytest.fixture(scope="session")
def shape_models():
    return fitted


@pytest.fixture(scope="session")
def sine():
    return fitted("sine")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
