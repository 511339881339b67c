import numpy as np
import pytest

from blocktri import BlockTridiagonalMatrix


@pytest.fixture
def swap2():
    """K=1, L=2 with B=0, C=D=1: the matrix [[0,1],[1,0]]."""
    return BlockTridiagonalMatrix.from_blocks([0.0, 0.0], [1.0], [1.0])


@pytest.fixture
def nilpotent2():
    """K=1, L=2 with B=0, C=0, D=1: the 2x2 nilpotent shift."""
    return BlockTridiagonalMatrix.from_blocks([0.0, 0.0], [0.0], [1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def sorted_complex(z):
    z = np.asarray(z, dtype=complex)
    return z[np.lexsort((np.round(z.imag, 8), np.round(z.real, 8)))]


def match_error(a, b):
    """Worst absolute deviation under the best one-to-one pairing."""
    from scipy.optimize import linear_sum_assignment
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
