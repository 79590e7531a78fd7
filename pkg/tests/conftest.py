import numpy as np
import pytest

from slrecon import _accel

ACCEPTANCE_LINES = []


def report(label: str, ok: bool, detail: str) -> None:
    """Record one acceptance line; printed in the terminal summary and echoed immediately."""
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    with _accel.using(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
