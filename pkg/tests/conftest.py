import sys

import numpy as np
import pytest

from suhmo import kernels


@pytest.fixture(params=["cython", "python"])
def backend(request):
    """Run a test once per kernel backend (the compiled one only if built)."""
    if request.param == "cython" and not kernels.HAVE_EXTENSION:
        pytest.skip("compiled extension not built")
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines (one per criterion) at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
