import numpy as np
import pytest
from hypothesis import settings

from otfdm.channel import PathSet
from otfdm.grid import FrameConfig

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_paths(rng, P, max_delay, max_nu=0.0):
    h = crandn(rng, P)
    h /= np.linalg.norm(h)
    delay = rng.integers(0, max_delay + 1, P)
    nu = rng.uniform(-max_nu, max_nu, P)
    return PathSet(h, delay, nu)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    return FrameConfig(M=8, N=4, n_cp=8)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
