import numpy as np
import pytest

from structvar.model import make_transition, simulate_var

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    """Log one acceptance line; it is echoed live and repeated in the summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line, flush=True)
    return passed


@pytest.fixture
def accept(capsys):
    def _accept(criterion, passed, detail):
        with capsys.disabled():
            record(criterion, passed, detail)
        return passed

    return _accept


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ls_problem():
    T = make_transition(20, rank=2, edge_prob=0.08, seed=7)
    return T, simulate_var(T, 200, seed=8)


@pytest.fixture(scope="session")
def sparse_problem():
    T = make_transition(15, edge_prob=0.1, seed=3)
    return T, simulate_var(T, 150, seed=4)
