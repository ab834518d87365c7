import numpy as np
import pytest

import levyqw as L

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hadamard_table_512():
    return L.build_sigma_q_table(L.DEFAULT_THETA, L.SYMMETRIC_QUBIT, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
