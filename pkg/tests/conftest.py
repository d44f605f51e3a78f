from __future__ import annotations


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.passed:
        outcome = "PASS"
    elif report.skipped:
        outcome = "SKIP"
    else:
        outcome = "FAIL"
    print(f"\n[acceptance] {name}: {outcome}", flush=True)
