import numpy as np
import pytest

from pathlsi.sampler import PathGrid, SamplerConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_cfg(T=1.0, n_steps=100, n_paths=200, seed=0, **kw):
    return SamplerConfig(PathGrid(T, n_steps), n_paths=n_paths, base_seed=seed, **kw)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
