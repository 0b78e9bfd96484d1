import numpy as np
import pytest

from liezalcman.liegroup import make_group


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


ALL_GROUPS = [("additive", 2), ("torus", 2), ("gl", 2), ("sl2", 2)]


@pytest.fixture(params=ALL_GROUPS, ids=lambda p: p[0])
def group(request):
    return make_group(*request.param)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
