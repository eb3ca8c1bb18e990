import math

import pytest

from fidendrite.cli import load_spec
from fidendrite.ifs_core import SimSystem

SQRT3_4 = math.sqrt(3) / 4


def system_named(name: str) -> SimSystem:
    return load_spec(name).to_system()


@pytest.fixture(scope="session")
def gasket():
    return system_named("gasket")


@pytest.fixture(scope="session")
def vicsek():
    return system_named("vicsek")


@pytest.fixture(scope="session")
def rotated_vicsek():
    return system_named("rotated_vicsek")


@pytest.fixture(scope="session")
def cantor():
    return system_named("cantor")


@pytest.fixture(scope="session")
def segment():
    return system_named("segment")


@pytest.fixture(scope="session")
def overlap():
    return system_named("overlap")


@pytest.fixture(scope="session")
def fi_cache():
    """fi_report results shared across tests (the reports are immutable in use)."""
    from fidendrite.intersection import fi_report

    cache = {}

    def get(system):
        if isinstance(system, str):
            key = system
            system = system_named(system)
        else:
            key = id(system)
        if key not in cache:
            cache[key] = fi_report(system)
        return cache[key]

    return get


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, what: str, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {what}" + (f" ({detail})" if detail else "")
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
