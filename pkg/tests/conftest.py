import copy

import numpy as np
import pytest

from regensync.generator import GenSpec, generate
from regensync.instance import load_fixture, load_instance
from regensync.mip import build_model
from regensync.spstp import build_sync_pairs

TINY = {
    "stations": [{"id": "A"}, {"id": "B"}],
    "platforms": [
        {"id": "A1", "station": "A", "line": "L1"},
        {"id": "B1", "station": "B", "line": "L1"},
    ],
    "tracks": [{"from": "A1", "to": "B1"}],
    "crossing_overs": [],
    "trains": [{
        "id": "T1", "path": ["A1", "B1"], "trip": [[120, 180]], "dwell": [[20, 60], [20, 60]],
        "travel": [100, 200], "accel": [[15, 25], [15, 25]], "brake": [[20, 30], [20, 30]],
    }],
    "omega": [],
    "connections": [],
    "turnarounds": [],
    "headways": [],
    "params": {"r": 300, "epsilon": 0.005, "delta": 300, "big_m": None, "horizon": None},
    "initial_timetable": [
        {"train_id": "T1", "platform_id": "A1", "arrival_s": 0, "departure_s": 30},
        {"train_id": "T1", "platform_id": "B1", "arrival_s": 180, "departure_s": 210},
    ],
}


def two_station_doc(mid_offset=3.0, r=300.0):
    """Two stations on opposite lines; T1 runs A1->B1 and U1 runs B2->A2.

    U1's dwell midpoint at A2 sits ``mid_offset`` seconds after T1's at A1.
    """
    doc = {
        "stations": [{"id": "A"}, {"id": "B"}],
        "platforms": [
            {"id": "A1", "station": "A", "line": "L1"}, {"id": "B1", "station": "B", "line": "L1"},
            {"id": "B2", "station": "B", "line": "L2"}, {"id": "A2", "station": "A", "line": "L2"},
        ],
        "tracks": [{"from": "A1", "to": "B1"}, {"from": "B2", "to": "A2"}],
        "crossing_overs": [{"from": "B1", "to": "B2"}, {"from": "A2", "to": "A1"}],
        "trains": [
            {"id": "T1", "path": ["A1", "B1"], "trip": [[100, 200]], "dwell": [[20, 60], [20, 60]],
             "travel": [100, 250], "accel": [[15, 25], [15, 25]], "brake": [[20, 30], [20, 30]]},
            {"id": "U1", "path": ["B2", "A2"], "trip": [[100, 200]], "dwell": [[20, 60], [20, 60]],
             "travel": [100, 250], "accel": [[15, 25], [15, 25]], "brake": [[20, 30], [20, 30]]},
        ],
        "omega": [["A1", "A2"]],
        "connections": [], "turnarounds": [], "headways": [],
        "params": {"r": r, "epsilon": 0.005, "delta": 300, "big_m": None, "horizon": None},
        "initial_timetable": [
            {"train_id": "T1", "platform_id": "A1", "arrival_s": 400, "departure_s": 430},
            {"train_id": "T1", "platform_id": "B1", "arrival_s": 580, "departure_s": 610},
            {"train_id": "U1", "platform_id": "B2", "arrival_s": 220 + mid_offset, "departure_s": 250 + mid_offset},
            {"train_id": "U1", "platform_id": "A2", "arrival_s": 400 + mid_offset, "departure_s": 430 + mid_offset},
        ],
    }
    return doc


@pytest.fixture
def tiny_doc():
    return copy.deepcopy(TINY)


def small_instance(seed):
    """Random small generated instance (at most a handful of pairs)."""
    rng = np.random.default_rng(seed)
    spec = GenSpec(
        stations=int(rng.integers(2, 6)), trains=int(rng.integers(2, 6)),
        headway=float(rng.integers(200, 400)), r=float(rng.integers(30, 200)), seed=seed,
    )
    return load_instance(generate(spec))


def model_of(inst, **overrides):
    import dataclasses
    p = dataclasses.replace(inst.params, **overrides) if overrides else inst.params
    right, left = build_sync_pairs(inst.network, inst.initial, p)
    return right + left, build_model(inst.network, p, right + left, inst.initial)


@pytest.fixture(scope="session")
def pes2():
    return load_fixture("pes2_sfm2_like")


@pytest.fixture(scope="session")
def five_pair():
    return load_fixture("five_pair")


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
