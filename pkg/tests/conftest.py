import math
import sys

import numpy as np
import pytest

from fdnet.diff import Batch
from fdnet.heat_data import Grid1D, PhysicsConfig, generate_dataset
from fdnet.model import FDNetParams


def small_physics(num_steps=40, dt=1.0, num_points=31):
    return PhysicsConfig(0.0002, dt, num_steps, Grid1D(num_points, math.pi))


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(12, small_physics(), num_modes=3, coeff_seed=5, split_seed=1)


@pytest.fixture(scope="session")
def stable_dataset():
    """Full-size stable dataset, generated once per session."""
    return generate_dataset(200, PhysicsConfig(0.0002, 1.0, 1000, Grid1D(31)))


@pytest.fixture(scope="session")
def unstable_dataset():
    return generate_dataset(200, PhysicsConfig(0.0002, 200.0, 5, Grid1D(31)))


def random_params(rng, k, scale=0.3):
    return FDNetParams.from_vector(scale * rng.standard_normal(16), k)


def random_batch(rng, size, M, scale=1.0):
    ids = np.arange(size)
    return Batch(scale * rng.standard_normal((size, M)), scale * rng.standard_normal((size, M)), ids, ids)


def central_difference(f, x, v, h=1e-4):
    """Richardson-extrapolated central difference of ``f`` at ``x`` along ``v``."""
    def d(step):
        return (f(x + step * v) - f(x - step * v)) / (2 * step)
    return (4 * d(h / 2) - d(h)) / 3


def fd_gradient(f, x, h=1e-4):
    return np.array([central_difference(f, x, e, h) for e in np.eye(x.size)])


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training reproductions (minutes)")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
