import pytest

from sdepoint import AdditiveProblem, LinearProblem


def linear_bt(b):
    """alpha = 0, beta(t) = b t."""
    return LinearProblem.polynomial(0.0, [0.0, b])


@pytest.fixture
def lin1():
    return linear_bt(1.0)


@pytest.fixture
def add_t():
    """a = 0, sigma(t) = t."""
    return AdditiveProblem.polynomial(0.0, [0.0, 1.0])


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
