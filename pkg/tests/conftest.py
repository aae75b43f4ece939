import numpy as np
import pytest

from panelreg import kernels
from panelreg.dataset import synthesize

BACKENDS = kernels.available_backends()

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    marker = props.get("criterion")
    if marker:
        num, title = marker
        # a test may report the time of work done in a shared fixture
        _criteria[num] = (title, report.outcome, props.get("seconds", report.duration))


def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, outcome, dur = _criteria[num]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {verdict}  {title}  ({dur:.2f}s)")


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    """Kernel module for each available backend."""
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    return synthesize(600, 7)
