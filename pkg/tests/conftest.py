import re

import pytest

from hetnetlab.rng import derive_rng

_CRITERIA = {}


@pytest.fixture
def rng():
    return derive_rng(12345, "tests")


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[n] = (m.group(2).replace("_", " "), report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        name, outcome, detail = _CRITERIA[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {n}: {status}  {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
