import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_runtest_logreport(report):
    # one pass/fail line per acceptance criterion
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {outcome} {name}", file=sys.stderr)
