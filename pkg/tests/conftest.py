import numpy as np
import pytest

from evade import dynamics as dyn
from evade.model import ModelParams


@pytest.fixture
def lattice2():
    return ModelParams(0.2, 1.0)


def hand_realization(starts, histories=None, lam=1.0, depth=6, horizon=None, speed=1.0,
                     dim=2, marks=None):
    """Lattice realization with explicit particles inside a window of ``depth``."""
    params = ModelParams(lam, speed, dim)
    window = dyn.make_window(params, depth, horizon)
    return dyn.realization_from_histories(params, window, np.asarray(starts).reshape(-1, dim),
                                          histories, marks)


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
