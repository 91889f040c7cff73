import pytest

from sortmc.transport.geometry import Geometry
from sortmc.transport.materials import build_materials, data_path, load_library

# Lines recorded by tests/test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def htr10_2g():
    lib = load_library(data_path("test_2g.lib"))
    return build_materials(data_path("htr10_materials.txt"), lib)


@pytest.fixture(scope="session")
def pebble_2g(htr10_2g):
    """Reflected two-region pebble: fuel kernel inside, carbon matrix shell."""
    geom = Geometry.pebble(2.5, 3.0, fuel=0, matrix=1)
    return geom, [htr10_2g["Fuel kernel"], htr10_2g["Pebble Carbon matrix"]]
