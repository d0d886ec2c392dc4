from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from biochip_fva.bench import six_ops_fixture, glucose_fixture

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def glucose():
    return glucose_fixture()


@pytest.fixture
def six_ops():
    return six_ops_fixture()


def F(x) -> Fraction:
    return Fraction(x)


_criteria: list[tuple[str, str, float]] = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria.append((props["criterion"], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, secs in sorted(_criteria, key=lambda c: int(c[0].split()[0])):
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}  ({secs:.2f}s)")
