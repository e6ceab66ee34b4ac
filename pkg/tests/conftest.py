import numpy as np
import pytest

from photothermal.boundary import assemble_operators
from photothermal.geometry import make_curve, make_grid
from photothermal.heat import HeatSetup

R_DISK = 2.0


@pytest.fixture(scope="session")
def disk():
    return make_curve("circle", {"radius": R_DISK}, 256)


@pytest.fixture(scope="session")
def kite():
    return make_curve("kite", {}, 256)


@pytest.fixture(scope="session")
def disk_ops(disk):
    return assemble_operators(disk)


@pytest.fixture(scope="session")
def kite_ops(kite):
    return assemble_operators(kite)


@pytest.fixture(scope="session")
def coarse_disk():
    return make_curve("circle", {"radius": R_DISK}, 128)


@pytest.fixture(scope="session")
def coarse_grid(coarse_disk):
    return make_grid(coarse_disk, 0.1)


@pytest.fixture(scope="session")
def coarse_setup(coarse_disk, coarse_grid):
    return HeatSetup(coarse_disk, coarse_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for line in results.values():
        terminalreporter.write_line(line)
