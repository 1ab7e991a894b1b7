"""Shared fixtures; the heavy simulation runs are session-scoped."""

import time
from dataclasses import replace

import pytest

import mgshare as mg

RUNTIMES: dict[str, float] = {}


@pytest.fixture(scope="session")
def lv5():
    return mg.parse_scenario("lv5")


@pytest.fixture(scope="session")
def lv5_reduced(lv5):
    return mg.kron_reduce(lv5.network)


@pytest.fixture(scope="session")
def lv5_equilibrium(lv5, lv5_reduced):
    return mg.solve_equilibrium(lv5_reduced, lv5.graph, lv5.params, mode="proposed")


@pytest.fixture(scope="session")
def case1_timeseries(lv5):
    """Full Case-1 timeline: activate at 10 s, -80% load at bus 5 at 25 s, restore at 40 s."""
    t0 = time.perf_counter()
    ts = mg.simulate(lv5)
    RUNTIMES["case1"] = time.perf_counter() - t0
    return ts


@pytest.fixture(scope="session")
def case2_timeseries(lv5):
    """Case-2 behavior on the lv5 network: limit shift to (1.01, 1.05) at 20 s."""
    events = (
        mg.Event(time=10.0, kind="activate"),
        mg.Event(time=20.0, kind="set-limits", v_min=1.01, v_max=1.05),
    )
    t0 = time.perf_counter()
    ts = mg.simulate(replace(lv5, t_end=40.0, events=events))
    RUNTIMES["case2"] = time.perf_counter() - t0
    return ts
