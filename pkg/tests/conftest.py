import logging

import numpy as np
import pytest

from kernelpde.fitting import DiffusionSet, fit
from kernelpde.radial_kernel import gaussian_kernel

# acceptance criteria record one line each here; printed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def _quiet_conditioning_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="kernelpde")


@pytest.fixture(scope="session")
def gaussian_fits():
    """Gaussian fits over d_j = 1 + sin(j-1) for N = 1..10 and n = 1, 2, 3."""
    ds = DiffusionSet.one_plus_sin(10)
    out = {}
    for n in (1, 2, 3):
        K = gaussian_kernel(n)
        out[n] = [fit(K, ds.head(N)) for N in range(1, 11)]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
