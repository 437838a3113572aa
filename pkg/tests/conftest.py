import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results: dict[str, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, title): acceptance criterion identifier")


@pytest.fixture
def measured(request):
    """Attach a measured-value note to the acceptance line of this test."""
    notes = []
    request.node.user_properties.append(("measured", notes))
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        notes = [n for key, val in item.user_properties if key == "measured" for n in val]
        if hasattr(report, "wasxfail"):
            status = "FAIL"
            notes.append(f"expected failure: {report.wasxfail}")
        else:
            status = "PASS" if report.outcome == "passed" else "FAIL"
        _results[label] = (status, title, "; ".join(notes))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_results, key=lambda s: (int("".join(c for c in s.split("-")[0] if c.isdigit())), s)):
        status, title, notes = _results[label]
        line = f"{label:<8} {status}  {title}"
        if notes:
            line += f"  [{notes}]"
        terminalreporter.write_line(line)
