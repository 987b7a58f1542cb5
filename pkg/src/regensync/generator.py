"""Synthetic two-line instances with a feasible initial timetable.

Line 1 runs station 1 to n on side-1 platforms, line 2 runs back on the
side-2 platforms.  Trains are dispatched in slots one headway apart and
alternate between the lines; a line-1 train reaching its terminal is linked
by a turn-around to a line-2 train leaving from the opposite platform, and
vice versa.  The timetable is forward simulated at nominal trip and dwell
times plus bounded integer jitter, so it's feasible by construction (and
checked before it's returned).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .instance import Instance, instance_to_dict, load_instance
from .network import validate_network, validate_params
from .timetable import validate_timetable

DWELL_NOMINAL = 30
DWELL_JITTER = 2
TRIP_JITTER = 1
TURN_MIN = 60


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    stations: int = 14
    trains: int = 20
    headway: float = 360.0
    trip_width: float = 20.0
    dwell_width: float = 30.0
    r: float = 300.0
    delta: Optional[float] = 300.0
    seed: int = 1
    min_headway: float = 90.0
    travel_slack: float = 30.0
    horizon: float = 21600.0
    epsilon: float = 0.005

    def check(self) -> None:
        for name in ("stations", "trains", "headway", "trip_width", "dwell_width", "r", "min_headway", "horizon"):
            if not getattr(self, name) > 0:
                raise GeneratorError(f"{name} must be positive")
        if self.stations < 2:
            raise GeneratorError("need at least 2 stations")
        if self.delta is not None and self.delta < 0:
            raise GeneratorError("delta must be non-negative")
        if self.trip_width < 4 * TRIP_JITTER:
            raise GeneratorError(f"trip_width must be at least {4 * TRIP_JITTER}")
        if self.dwell_width < 2 * DWELL_JITTER + 10:
            raise GeneratorError(f"dwell_width must be at least {2 * DWELL_JITTER + 10}")


def _slot_jitter(spec: GenSpec) -> int:
    # two consecutive trains may drift apart by twice the path jitter
    drift = spec.stations * DWELL_JITTER + (spec.stations - 1) * TRIP_JITTER
    room = (spec.headway - spec.min_headway - 2 * drift) / 2
    if room < 0:
        raise GeneratorError(
            f"headway {spec.headway:g} s cannot keep a {spec.min_headway:g} s minimum headway "
            f"under {drift} s of timetable jitter"
        )
    return int(min(spec.headway / 6, room))


def generate(spec: GenSpec) -> dict[str, Any]:
    """Instance document for ``spec``; the same spec always yields the same document."""
    spec.check()
    rng = np.random.default_rng(spec.seed)
    n = spec.stations
    stations = [f"ST{k + 1:02d}" for k in range(n)]
    line_paths = {
        "L1": [f"{s}-1" for s in stations],
        "L2": [f"{s}-2" for s in reversed(stations)],
    }
    platforms = [{"id": f"{s}-{side}", "station": s, "line": f"L{side}"} for s in stations for side in (1, 2)]
    tracks = [{"from": a, "to": b} for path in line_paths.values() for a, b in zip(path, path[1:])]
    crossing_overs = [
        {"from": line_paths["L1"][-1], "to": line_paths["L2"][0]},
        {"from": line_paths["L2"][-1], "to": line_paths["L1"][0]},
    ]

    gap_nominal = rng.integers(80, 151, size=n - 1)
    trip_nominal = {
        "L1": [int(g) for g in gap_nominal],
        "L2": [int(g) for g in gap_nominal[::-1]],
    }
    accel_lb = {p["id"]: int(rng.integers(12, 25)) for p in platforms}
    brake_lb = {p["id"]: int(rng.integers(12, 25)) for p in platforms}
    lo_w = math.ceil(spec.trip_width / 4)
    hi_w = spec.trip_width - lo_w
    dwell_lo = DWELL_NOMINAL - 10
    dwell_hi = dwell_lo + spec.dwell_width

    jitter = _slot_jitter(spec)
    n_line = {"L1": (spec.trains + 1) // 2, "L2": spec.trains // 2}
    offset = {"L1": 60.0, "L2": 60.0 + float(rng.integers(0, int(spec.headway)))}
    slots: list[tuple[float, str, int]] = []
    for line in ("L1", "L2"):
        for k in range(n_line[line]):
            start = offset[line] + k * spec.headway + int(rng.integers(-jitter, jitter + 1))
            slots.append((start, line, k))
    slots.sort()
    if slots and slots[-1][0] > spec.horizon:
        raise GeneratorError(
            f"{spec.trains} trains at {spec.headway:g} s headway do not fit a {spec.horizon:g} s horizon"
        )

    trains, records = [], []
    ends: dict[str, list[tuple[float, str]]] = {"L1": [], "L2": []}
    starts: dict[str, list[tuple[float, str]]] = {"L1": [], "L2": []}
    for number, (start, line, k) in enumerate(slots):
        tid = f"T{number + 1:03d}"
        path = line_paths[line]
        t_now = float(start)
        arr, dep = [], []
        for step, platform in enumerate(path):
            arr.append(t_now)
            t_now += DWELL_NOMINAL + int(rng.integers(-DWELL_JITTER, DWELL_JITTER + 1))
            dep.append(t_now)
            if step < len(path) - 1:
                t_now += trip_nominal[line][step] + int(rng.integers(-TRIP_JITTER, TRIP_JITTER + 1))
        run = arr[-1] - dep[0]
        trains.append({
            "id": tid,
            "path": path,
            "trip": [[g - lo_w, g + hi_w] for g in trip_nominal[line]],
            "dwell": [[dwell_lo, dwell_hi] for _ in path],
            "travel": [max(0.0, run - spec.travel_slack), run + spec.travel_slack],
            "accel": [[accel_lb[p], accel_lb[p] + 10] for p in path],
            "brake": [[brake_lb[p], brake_lb[p] + 10] for p in path],
        })
        records += [
            {"train_id": tid, "platform_id": p, "arrival_s": a, "departure_s": d}
            for p, a, d in zip(path, arr, dep)
        ]
        starts[line].append((arr[0], tid))
        ends[line].append((dep[-1], tid))

    turn_hi = TURN_MIN + spec.headway + 2 * jitter + 60
    turnarounds = []
    for src, dst in (("L1", "L2"), ("L2", "L1")):
        used: set[str] = set()
        cands = sorted(starts[dst])
        for leave, tid in sorted(ends[src]):
            for arrive, nxt in cands:
                if nxt not in used and TURN_MIN <= arrive - leave <= turn_hi:
                    used.add(nxt)
                    turnarounds.append({
                        "from": line_paths[src][-1], "to": line_paths[dst][0],
                        "train": tid, "next_train": nxt, "window": [TURN_MIN, turn_hi],
                    })
                    break

    dep_at = {(r["train_id"], r["platform_id"]): r["departure_s"] for r in records}
    headways = []
    for line, path in line_paths.items():
        on_line = [t["id"] for t in trains if t["path"] is path]
        for a, b in zip(path, path[1:]):
            order = sorted(on_line, key=lambda t: (dep_at[(t, a)], t))
            for t1, t2 in zip(order, order[1:]):
                headways.append({
                    "from": a, "to": b, "train": t1, "next_train": t2,
                    "headway": [spec.min_headway, spec.min_headway],
                })

    doc = {
        "stations": [{"id": s} for s in stations],
        "platforms": platforms,
        "tracks": tracks,
        "crossing_overs": crossing_overs,
        "trains": trains,
        "omega": [[f"{s}-1", f"{s}-2"] for s in stations],
        "connections": [],
        "turnarounds": turnarounds,
        "headways": headways,
        "params": {"r": spec.r, "epsilon": spec.epsilon, "delta": spec.delta, "big_m": None, "horizon": None},
        "initial_timetable": records,
    }
    inst = load_instance(doc)
    _check(inst)
    return instance_to_dict(inst)


def _check(inst: Instance) -> None:
    problems = [str(x) for x in validate_network(inst.network)]
    problems += [str(x) for x in validate_params(inst.network, inst.params)]
    problems += [str(x) for x in validate_timetable(inst.initial, inst.network, inst.params)]
    if problems:
        raise GeneratorError("generated instance is inconsistent: " + "; ".join(problems[:5]))


def fixture_spec(**overrides: Any) -> GenSpec:
    """The 14-station, two-line network with 20 trains at a 360 s headway."""
    base = dict(stations=14, trains=20, headway=360.0, seed=1)
    base.update(overrides)
    return GenSpec(**base)


# bundled instances, regenerated by `regensync gen --fixture NAME`
FIXTURES: dict[str, GenSpec] = {
    "pes2_sfm2_like": fixture_spec(),
    "four_train": GenSpec(stations=5, trains=4, headway=300.0, r=60.0, seed=6),
    "five_pair": GenSpec(stations=4, trains=4, headway=300.0, r=200.0, seed=5),
    "one_pair": GenSpec(stations=3, trains=2, headway=300.0, r=120.0, seed=1),
    "two_pair": GenSpec(stations=3, trains=2, headway=300.0, r=200.0, seed=1),
}

# about the size of the largest published instance: ~21k rows, ~790 binaries
SCALE_SPEC = GenSpec(stations=14, trains=190, headway=220.0, r=65.0, seed=1)
