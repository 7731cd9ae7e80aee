import numpy as np
import pytest

from gpmtd.streams import RandomStream


@pytest.fixture
def stream():
    return RandomStream(20240611)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_spd(rng, n, ridge=0.5):
    a = rng.standard_normal((n, n))
    return a @ a.T + ridge * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
