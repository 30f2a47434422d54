"""Shared pytest wiring.

Collects the per-criterion results from test_acceptance.py and prints one
[PASS]/[FAIL] line per criterion in the terminal summary, so a plain
pytest run doubles as the release checklist.
"""

_acceptance_reports = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_reports.append(report)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_reports:
        return
    terminalreporter.section("acceptance criteria")
    for report in _acceptance_reports:
        props = dict(report.user_properties)
        label = props.get("criterion", report.nodeid.split("::")[-1])
        observed = props.get("observed")
        if report.passed:
            line = f"[PASS] {label}"
            if observed:
                line += f" ({observed})"
            terminalreporter.write_line(line, green=True)
        else:
            terminalreporter.write_line(f"[FAIL] {label}", red=True)
