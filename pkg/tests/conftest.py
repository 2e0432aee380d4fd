import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion id -> list of (test name, passed)
ACCEPTANCE: dict[str, list[tuple[str, bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): ties a test to a numbered acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        for mark in item.iter_markers("criterion"):
            item.user_properties.append(("criterion", str(mark.args[0])))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for marker in report.user_properties:
        if marker[0] == "criterion":
            ACCEPTANCE.setdefault(marker[1], []).append((report.nodeid, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=int):
        results = ACCEPTANCE[crit]
        ok = all(p for _, p in results)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {crit}  ({sum(p for _, p in results)}/{len(results)} checks)")
