import os
from pathlib import Path

import pytest

from bvlab import dirichlet as dr
from bvlab import localcoeffs as lc

ROOT = Path(__file__).resolve().parents[1]
TAU_CACHE = Path(os.environ.get("BVLAB_TAU_CACHE", ROOT / ".cache" / "tau.bin"))


@pytest.fixture(scope="session")
def tau():
    # computed once (a few minutes) if the cache is absent, then reused
    return lc.tau_table(10**6, cache=TAU_CACHE)


@pytest.fixture(scope="session")
def sieve():
    return dr.build_sieve(10**6)


@pytest.fixture(scope="session")
def delta(tau):
    return lc.ExemplarPi("delta", tau)


@pytest.fixture(scope="session")
def exemplars(tau):
    return {nm: lc.ExemplarPi(nm, None if nm == "zeta" else tau)
            for nm in ("zeta", "delta", "sym2-delta", "sym3-delta")}


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
