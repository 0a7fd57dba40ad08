import numpy as np
import pytest
from hypothesis import settings

from polylap.kernel import KernelParams
from polylap.quad import QuadratureConfig

settings.register_profile("polylap", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("polylap")


@pytest.fixture
def cfg():
    return QuadratureConfig()


@pytest.fixture
def half_order_two():
    return KernelParams(1, 0.5, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
