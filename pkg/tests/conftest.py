import json
from pathlib import Path

import pytest

from pv5 import pvcore

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())

ACCEPTANCE = {"u_hat": 1 + 0j, "t1": 40.0, "t0": 0.05, "rtol": 1e-11, "atol": 1e-13}
CHECKPOINTS = (0.2, 0.1, 1.0, 2.0, 4.0)


def cpx(pair):
    return complex(pair[0], pair[1])


def acceptance_trajectory():
    start = pvcore.seed_at_infinity(ACCEPTANCE["t1"], pvcore.SeedInf(ACCEPTANCE["u_hat"]), refined=True)
    return pvcore.integrate(start, ACCEPTANCE["t0"], ACCEPTANCE["rtol"], ACCEPTANCE["atol"], t_eval=CHECKPOINTS)


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(scope="session")
def acceptance_traj():
    return acceptance_trajectory()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
