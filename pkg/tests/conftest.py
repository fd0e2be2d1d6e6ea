"""Shared pytest configuration."""


def pytest_runtest_logreport(report):
    # one visible PASS/FAIL line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {status}: {name}", flush=True)
