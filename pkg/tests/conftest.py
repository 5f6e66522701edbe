import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_acceptance = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = dict(report.user_properties).get("acceptance")
    if marker is None:
        return
    number, title = marker
    elapsed = dict(report.user_properties).get("elapsed")
    _acceptance[number] = (title, report.outcome, elapsed)


def pytest_runtest_setup(item):
    m = item.get_closest_marker("acceptance")
    if m is not None:
        item.user_properties.append(("acceptance", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, outcome, elapsed = _acceptance[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        timing = f" ({elapsed:.1f} s)" if elapsed is not None else ""
        terminalreporter.write_line(f"{status}  criterion {number}: {title}{timing}")
