import numpy as np
import pytest

from chdbc.assembly import assemble
from chdbc.mesh import generate_disk, generate_square
from chdbc.potentials import PotentialPair, double_well


@pytest.fixture(scope="session")
def small_disk():
    return generate_disk(1.0, 12, 0)


@pytest.fixture(scope="session")
def small_ops(small_disk):
    return assemble(small_disk)


@pytest.fixture(scope="session")
def disk_ops():
    return assemble(generate_disk(1.0, 32, 1))


@pytest.fixture(scope="session")
def square_ops():
    return assemble(generate_square(1.0, 6))


@pytest.fixture(scope="session")
def dw_pair():
    return PotentialPair.same(double_well())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
