import numpy as np
import pytest
from hypothesis import settings

from renderwait.imaging import Frame

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def solid(rgb, w=24, h=16, t=0.0):
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:] = rgb
    return Frame(px, t)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance reporting --------------------------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if report.failed or (report.when == "call" and report.passed) or report.skipped:
        prev = _criteria.get(n, (None, title))[0]
        verdict = "FAIL" if report.failed or prev == "FAIL" else ("SKIP" if report.skipped else "PASS")
        _criteria[n] = (verdict, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        verdict, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {title}")
