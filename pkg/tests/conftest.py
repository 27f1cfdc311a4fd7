import re

from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True, print_blob=True)
settings.load_profile("ci")

_CRITERIA: dict[int, list[bool]] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d+)_")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.setdefault(int(m.group(1)), []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        results = _CRITERIA[k]
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d}: {status} ({sum(results)}/{len(results)} checks)")
