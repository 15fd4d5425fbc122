"""Collects per-criterion outcomes from tests marked ``criterion(k, title)``."""

import pytest

_OUTCOMES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    k, title = mark.args
    entry = _OUTCOMES.setdefault(k, {"title": title, "passed": True, "failures": []})
    if rep.failed:
        entry["passed"] = False
        entry["failures"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        e = _OUTCOMES[k]
        status = "PASS" if e["passed"] else "FAIL"
        extra = "" if e["passed"] else f"  (failed: {', '.join(e['failures'])})"
        terminalreporter.write_line(f"criterion {k}: {status}  {e['title']}{extra}")
