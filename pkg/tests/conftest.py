"""Acceptance bookkeeping: tests marked ``criterion(n, label)`` are aggregated into one line per criterion."""

from collections import OrderedDict

import pytest

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, label = mark.args
            entry = _CRITERIA.setdefault(number, {"label": label, "outcomes": {}})
            entry["outcomes"][item.nodeid] = None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    outcomes = _CRITERIA[mark.args[0]]["outcomes"]
    if report.failed:
        outcomes[item.nodeid] = False
    elif report.when == "call" and outcomes[item.nodeid] is None:
        outcomes[item.nodeid] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        results = list(entry["outcomes"].values())
        if all(r is True for r in results):
            status = "PASS"
        elif any(r is False for r in results):
            status = "FAIL"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {entry['label']}")
