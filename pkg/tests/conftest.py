import json

import pytest

from swotforge.registry import load_registry

_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


def senml(value, name="bodyTemperature", unit="Cel", **extra):
    rec = {"n": name, "u": unit, "v": value, **extra}
    return json.dumps([rec])


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture(scope="session")
def bundle(registry):
    return registry.materialize("naturopathy")


@pytest.fixture
def fever_text():
    return senml(38.2)


@pytest.fixture
def normal_text():
    return senml(36.6)
