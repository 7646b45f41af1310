import sys
from importlib.resources import files
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qvsec.network import Branch, Bus, Generator, Network, load_case  # noqa: E402
from qvsec.powerflow import solve  # noqa: E402

DATA = files("qvsec.data")


def data_path(name: str) -> Path:
    return Path(str(DATA / name))


def quiet_load(name: str) -> Network:
    return load_case(data_path(name))


def two_bus(p_load=0.0, q_load=0.0, x=0.1, b_shunt=0.0, v1=1.0) -> Network:
    return Network(
        mva_base=100.0,
        buses=(Bus(1, "slack", v1), Bus(2, "pq", p_load=p_load, q_load=q_load, b_shunt=b_shunt, zone=1)),
        generators=(Generator(1, 0.0, v1),),
        branches=(Branch(1, 2, 0.0, x),),
        name="two_bus",
    )


@pytest.fixture(scope="session")
def case14():
    return quiet_load("case14.m")


@pytest.fixture(scope="session")
def case30():
    return quiet_load("case30.m")


@pytest.fixture(scope="session")
def ieee14z():
    return quiet_load("ieee14_zoned.yaml")


@pytest.fixture(scope="session")
def ieee14z_base(ieee14z):
    return solve(ieee14z)


@pytest.fixture(scope="session")
def five_bus():
    return quiet_load("five_bus_two_zone.yaml")


@pytest.fixture(scope="session")
def ieee14_scan_run(ieee14z):
    """All-branch scan plus the switch-round count and status of every solve it made."""
    from qvsec.powerflow import PreparedNetwork
    from qvsec.scenarios import run_scan

    record = []
    original = PreparedNetwork.solve

    def traced(self, *args, **kwargs):
        sol = original(self, *args, **kwargs)
        record.append((sol.switch_rounds, sol.status))
        return sol

    mp = pytest.MonkeyPatch()
    mp.setattr(PreparedNetwork, "solve", traced)
    try:
        scan = run_scan(ieee14z, range(len(ieee14z.branches)))
    finally:
        mp.undo()
    return scan, record


@pytest.fixture(scope="session")
def ieee14_scan(ieee14_scan_run):
    return ieee14_scan_run[0]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
