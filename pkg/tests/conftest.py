import numpy as np
import pytest
from hypothesis import strategies as st

from tvindist.core import FiniteDistribution


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def mass_vectors(size):
    return st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=size, max_size=size).filter(
        lambda w: sum(w) > 1e-3).map(lambda w: [x / sum(w) for x in w])


@st.composite
def distribution_pairs(draw, max_size=6):
    k = draw(st.integers(1, max_size))
    p = draw(mass_vectors(k))
    q = draw(mass_vectors(k))
    return FiniteDistribution(list(range(k)), p), FiniteDistribution(list(range(k)), q)


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    """Log one acceptance verdict; all verdicts are printed at the end of the run."""
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} C{criterion:02d} {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: l.split()[1]):
            terminalreporter.write_line(line)
