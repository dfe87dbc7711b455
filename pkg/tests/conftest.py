import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}
_DETAILS = {}


@pytest.fixture
def detail(request):
    """Record a one-line measurement summary for an acceptance criterion."""

    def note(text):
        _DETAILS[request.node.name] = text

    return note


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        if _CRITERIA.get(name) != "FAIL":
            _CRITERIA[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        extra = _DETAILS.get(name, "")
        terminalreporter.write_line(f"{_CRITERIA[name]}  {name}" + (f"  [{extra}]" if extra else ""))
