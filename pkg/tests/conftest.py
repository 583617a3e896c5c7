import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Register a one-line PASS/FAIL summary for an acceptance criterion."""
    def record(number, title, passed, detail=""):
        ACCEPTANCE_LINES.append(
            (number, f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  {detail}"))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda p: p[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
