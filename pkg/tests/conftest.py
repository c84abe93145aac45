import numpy as np
import pytest

from vpcal.geometry import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def generic_center(grid, base=(0.5, 0.5), offset=(0.3183, 0.1173)):
    """A centre away from lattice symmetry axes, so discrete disks are not symmetric."""
    return np.asarray(base) + np.asarray(offset) * grid.h


@pytest.fixture
def grid128():
    return Grid(128)


ACCEPTANCE = {}


def record_acceptance(item, passed, detail):
    """Remember one verdict line per acceptance criterion for the terminal summary."""
    ACCEPTANCE[item] = f"acceptance {item}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE[item])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
