from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


class _Notes:
    def __init__(self, number):
        self.number = number

    def __call__(self, text: str) -> None:
        _RESULTS.setdefault(self.number, {}).setdefault("notes", []).append(text)
        print(text)


@pytest.fixture
def note(request):
    m = request.node.get_closest_marker("criterion")
    return _Notes(m.args[0] if m else None)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    entry = _RESULTS.setdefault(m.args[0], {})
    entry["title"] = m.args[1]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry["outcome"] = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        entry["seconds"] = rep.duration


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        tr.write_line(f"criterion {n:2d}  {e.get('outcome', 'NOT RUN'):4s}  {e.get('title', '')}"
                      f"  ({e.get('seconds', 0.0):.1f} s)")
        for text in e.get("notes", []):
            tr.write_line(f"              {text}")
