import numpy as np
import pytest

from soul.nn import ParamVector


def flat_params(values) -> ParamVector:
    values = np.asarray(values, dtype=np.float64)
    return ParamVector(("flat",), ((values.size,),), values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
