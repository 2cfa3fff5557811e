from fractions import Fraction

import pytest

from toric_sasaki.catalog import builtin_entries, weighted_s3
from toric_sasaki.ma_solver import continuity_path
from toric_sasaki.pipeline import analyze

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def entries():
    return builtin_entries()


@pytest.fixture(scope="session")
def geometries(entries):
    return {e.name: analyze(e.cone) for e in entries}


@pytest.fixture(scope="session")
def w32():
    return analyze(weighted_s3(Fraction(3, 2)).cone)


@pytest.fixture(scope="session")
def w32_path(w32):
    return continuity_path(w32.grid())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

