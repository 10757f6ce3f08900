"""Shared pytest hooks: print one summary line per acceptance criterion.

The acceptance tests live in ``test_acceptance.py`` and are named
``test_criterion_NN_<slug>``.  After the run, one line per criterion is
printed in the terminal summary so the verdicts are visible without
digging through the verbose listing:

    ACCEPTANCE 01 PASS -- schedule identities (...)
"""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")

_results: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match or "test_acceptance" not in report.nodeid:
        return
    num = int(match.group(1))
    slug = match.group(2).replace("_", " ")
    entry = _results.setdefault(num, {"slug": slug, "passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
    if report.when == "call":
        for name, value in report.user_properties:
            if name == "detail":
                entry["detail"] = str(value)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        entry = _results[num]
        verdict = "PASS" if entry["passed"] else "FAIL"
        line = f"ACCEPTANCE {num:02d} {verdict} -- {entry['slug']}"
        if entry["detail"]:
            line += f" ({entry['detail']})"
        terminalreporter.write_line(line)
