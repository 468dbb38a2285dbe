"""Shared fixtures: equilibrium profiles and sampled grids reused across files."""

import sys

import numpy as np
import pytest

from gassphere import polytrope, scheme


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance verdicts after the test summary."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance checks")
        for line in lines:
            terminalreporter.write_line(line)

# default-parameter star used by most dynamic tests (matches RunConfig)
GAMMA = 1.5
MASS = 5.0


@pytest.fixture(scope="session")
def prof15():
    return polytrope.solve_lane_emden(GAMMA, MASS)


@pytest.fixture(scope="session")
def prof2():
    return polytrope.solve_lane_emden(2.0, 1.0)


@pytest.fixture(scope="session")
def bg64(prof15):
    return scheme.sample_background(prof15, 64, 1.0, 1.0)


@pytest.fixture(scope="session")
def bg100(prof15):
    return scheme.sample_background(prof15, 100, 1.0, 1.0)


def dilated_state(bg, lam):
    """Uniform dilation r = lam x with matching closure constants."""
    r = lam * bg.x
    v = np.zeros_like(bg.x)
    return scheme.LagrangianState(
        t=0.0, r=r, v=v, r0_tail=(float(r[-2]), float(r[-1]))
    )
