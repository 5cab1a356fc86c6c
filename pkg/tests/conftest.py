import numpy as np
import pytest

from risee.units import SPEED_OF_LIGHT

LAMBDA = 0.0571
FREQ = SPEED_OF_LIGHT / LAMBDA


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance verdicts, filled by test_acceptance.py as each criterion runs
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
