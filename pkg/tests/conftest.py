import re

from hypothesis import settings

settings.register_profile("cidlab", deadline=None, derandomize=True)
settings.load_profile("cidlab")

_CRITERIA: dict[int, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.setdefault(int(m.group(1)), []).append((report.nodeid.split("::")[-1],
                                                          report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        results = _CRITERIA[k]
        ok = all(outcome == "passed" for _, outcome in results)
        failed = [name for name, outcome in results if outcome != "passed"]
        note = "" if ok else f"  (failing: {', '.join(failed)})"
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}{note}")
