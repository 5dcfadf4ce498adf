import math

import pytest

from spinmech.mechanics import MechanicalMode
from spinmech.nv import SpinSystem

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n = mark.args[0]
    detail = getattr(item, "acceptance_detail", "")
    ACCEPTANCE[n] = (rep.passed, detail)
    line = f"ACCEPTANCE {n}: {'PASS' if rep.passed else 'FAIL'}" + (f"  {detail}" if detail else "")
    tr = item.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.write_line("")
        tr.write_line(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def spin():
    return SpinSystem()


@pytest.fixture
def kilohertz_libration():
    """10 um diamond sphere in a 1 kHz trap, Q = 50."""
    w0 = 2 * math.pi * 1e3
    return MechanicalMode("librational", 1.8326e-23, w0, w0 / 50, 300.0)
