import numpy as np
import pytest

from cribsim.broadening import make_profile
from cribsim.model import ControlSchedule, PulseShape, SpatialGrid
from cribsim.solver import MaxwellBlochSolver

ACCEPTANCE_LINES: list[str] = []


def medium(d, n_z=11, length=0.1, width=10.0, n_delta=512, decay=0.0, kind="gaussian", **kw):
    return MaxwellBlochSolver(SpatialGrid(length, n_z, **kw), make_profile(kind, width), d,
                              n_delta=n_delta, decay=decay)


def echo_run(d, t0=8.0, imprint=True, shape=None, **kw):
    shape = shape or PulseShape.gaussian(0.0, 1.0)
    return medium(d, **kw).run(shape, ControlSchedule.crib(t0, imprint=imprint))


def phase_distance(phi, target=np.pi):
    return abs((phi - target + np.pi) % (2 * np.pi) - np.pi)


@pytest.fixture
def acceptance():
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
