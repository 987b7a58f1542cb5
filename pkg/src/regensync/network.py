"""Railway network topology and the static parameter sets consumed by the model.

Platforms are the nodes of a directed graph whose arcs are tracks.  Trains are
functional trains: a physical train that turns around at a terminal shows up
as two `Train` records linked by a turn-around pair.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

Window = tuple[float, float]


class InstanceError(ValueError):
    """Malformed instance document."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class DanglingReferenceError(InstanceError):
    def __init__(self, kind: str, ref: str, location: str = ""):
        self.kind = kind
        self.ref = ref
        super().__init__(f"unknown {kind} {ref!r}", location)


@dataclass(frozen=True)
class Platform:
    id: str
    station: str
    line: str


@dataclass(frozen=True)
class Track:
    start: str
    end: str


@dataclass(frozen=True)
class CrossingOver:
    start: str
    end: str


@dataclass(frozen=True)
class Train:
    id: str
    path: tuple[str, ...]

    @property
    def tracks(self) -> tuple[Track, ...]:
        return tuple(Track(a, b) for a, b in zip(self.path, self.path[1:]))

    @property
    def first(self) -> str:
        return self.path[0]

    @property
    def last(self) -> str:
        return self.path[-1]


@dataclass(frozen=True)
class TrainLink:
    """An ordered train pair tied to a platform pair.

    Used for connections (train arrives at ``start``, ``next_train`` departs
    from ``end``), turn-arounds (train leaves terminal ``start``,
    ``next_train`` arrives at ``end``) and headways (successive trains on
    track ``start -> end``).
    """

    start: str
    end: str
    train: str
    next_train: str


@dataclass(frozen=True)
class RailNetwork:
    stations: tuple[str, ...]
    platforms: Mapping[str, Platform]
    tracks: tuple[Track, ...]
    crossing_overs: tuple[CrossingOver, ...]
    trains: Mapping[str, Train]
    omega: tuple[tuple[str, str], ...] = ()
    connections: tuple[TrainLink, ...] = ()
    turnarounds: tuple[TrainLink, ...] = ()
    headways: tuple[TrainLink, ...] = ()

    @property
    def lines(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for p in self.platforms.values():
            out.setdefault(p.line, []).append(p.id)
        return out

    def trains_at(self, platform: str) -> list[str]:
        """Trains whose path visits ``platform`` (the set T_i), sorted by id."""
        return sorted(t.id for t in self.trains.values() if platform in t.path)

    def events(self) -> list[tuple[str, str]]:
        """All (train, platform) event keys in canonical order."""
        return [(t.id, i) for t in sorted(self.trains.values(), key=lambda t: t.id) for i in t.path]

    def opposite(self, i: str, j: str) -> bool:
        pi, pj = self.platforms[i], self.platforms[j]
        return i != j and pi.station == pj.station and pi.line != pj.line


@dataclass
class ModelParams:
    """Time windows and global constants, all in seconds."""

    trip: dict[tuple[str, str, str], Window] = field(default_factory=dict)
    dwell: dict[tuple[str, str], Window] = field(default_factory=dict)
    travel: dict[str, Window] = field(default_factory=dict)
    connection: dict[TrainLink, Window] = field(default_factory=dict)
    turnaround: dict[TrainLink, Window] = field(default_factory=dict)
    headway: dict[TrainLink, Window] = field(default_factory=dict)
    accel: dict[tuple[str, str], Window] = field(default_factory=dict)
    brake: dict[tuple[str, str], Window] = field(default_factory=dict)
    default_accel: Optional[Window] = None
    default_brake: Optional[Window] = None
    r: float = 300.0
    epsilon: float = 0.005
    delta: Optional[float] = 300.0
    big_m: Optional[float] = None
    horizon: Optional[float] = None

    def accel_window(self, train: str, platform: str) -> Window:
        w = self.accel.get((train, platform), self.default_accel)
        if w is None:
            raise KeyError(f"no acceleration bounds for ({train}, {platform})")
        return w

    def brake_window(self, train: str, platform: str) -> Window:
        w = self.brake.get((train, platform), self.default_brake)
        if w is None:
            raise KeyError(f"no braking bounds for ({train}, {platform})")
        return w

    def accel_lb(self, train: str, platform: str) -> float:
        return self.accel_window(train, platform)[0]

    def brake_lb(self, train: str, platform: str) -> float:
        return self.brake_window(train, platform)[0]


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    ids: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


# --------------------------------------------------------------------------
# loading


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(obj, Mapping):
        raise InstanceError("expected an object", where)
    if key not in obj:
        raise InstanceError(f"missing key {key!r}", where)
    return obj[key]


def _window(value: Any, where: str) -> Window:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise InstanceError("expected a [lower, upper] pair", where)
    try:
        lo, hi = float(value[0]), float(value[1])
    except (TypeError, ValueError):
        raise InstanceError("window bounds must be numbers", where) from None
    return lo, hi


def _optional_float(value: Any, where: str) -> Optional[float]:
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InstanceError("expected a number or null", where) from None


def parse_document(text: str) -> dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise InstanceError("top level must be an object")
    return doc


def load_network(doc: Mapping[str, Any] | str) -> tuple[RailNetwork, ModelParams]:
    """Build a linked network and its parameters from an instance document.

    ``doc`` is either the JSON text or the already-decoded mapping.  Every
    cross-reference is resolved; an unknown id raises
    `DanglingReferenceError` naming it.
    """
    if isinstance(doc, str):
        doc = parse_document(doc)

    stations = []
    for k, s in enumerate(_require(doc, "stations", "")):
        stations.append(str(_require(s, "id", f"stations[{k}]")))
    station_set = set(stations)
    if len(station_set) != len(stations):
        raise InstanceError("duplicate station id", "stations")

    platforms: dict[str, Platform] = {}
    for k, p in enumerate(_require(doc, "platforms", "")):
        where = f"platforms[{k}]"
        pid = str(_require(p, "id", where))
        st = str(_require(p, "station", where))
        if st not in station_set:
            raise DanglingReferenceError("station", st, where)
        if pid in platforms:
            raise InstanceError(f"duplicate platform id {pid!r}", where)
        platforms[pid] = Platform(pid, st, str(_require(p, "line", where)))

    def plat(ref: Any, where: str) -> str:
        ref = str(ref)
        if ref not in platforms:
            raise DanglingReferenceError("platform", ref, where)
        return ref

    tracks = tuple(
        Track(plat(_require(a, "from", f"tracks[{k}]"), f"tracks[{k}]"), plat(_require(a, "to", f"tracks[{k}]"), f"tracks[{k}]"))
        for k, a in enumerate(_require(doc, "tracks", ""))
    )
    crossing_overs = tuple(
        CrossingOver(
            plat(_require(c, "from", f"crossing_overs[{k}]"), f"crossing_overs[{k}]"),
            plat(_require(c, "to", f"crossing_overs[{k}]"), f"crossing_overs[{k}]"),
        )
        for k, c in enumerate(doc.get("crossing_overs", []))
    )

    params_doc = doc.get("params", {}) or {}
    params = ModelParams(
        r=float(params_doc.get("r", 300.0)),
        epsilon=float(params_doc.get("epsilon", 0.005)),
        delta=_optional_float(params_doc.get("delta", 300.0), "params.delta"),
        big_m=_optional_float(params_doc.get("big_m"), "params.big_m"),
        horizon=_optional_float(params_doc.get("horizon"), "params.horizon"),
    )
    defaults = params_doc.get("defaults", {}) or {}
    if "accel" in defaults:
        params.default_accel = _window(defaults["accel"], "params.defaults.accel")
    if "brake" in defaults:
        params.default_brake = _window(defaults["brake"], "params.defaults.brake")
    default_dwell = _window(defaults["dwell"], "params.defaults.dwell") if "dwell" in defaults else None

    trains: dict[str, Train] = {}
    for k, t in enumerate(_require(doc, "trains", "")):
        where = f"trains[{k}]"
        tid = str(_require(t, "id", where))
        if tid in trains:
            raise InstanceError(f"duplicate train id {tid!r}", where)
        path = tuple(plat(x, f"{where}.path") for x in _require(t, "path", where))
        train = Train(tid, path)
        trains[tid] = train

        trips = t.get("trip")
        if trips is not None:
            if len(trips) != len(train.tracks):
                raise InstanceError(f"expected {len(train.tracks)} trip windows", f"{where}.trip")
            for arc, w in zip(train.tracks, trips):
                params.trip[(tid, arc.start, arc.end)] = _window(w, f"{where}.trip")
        for name, target in (("dwell", params.dwell), ("accel", params.accel), ("brake", params.brake)):
            values = t.get(name)
            if values is None:
                continue
            if len(values) != len(path):
                raise InstanceError(f"expected {len(path)} {name} windows", f"{where}.{name}")
            for i, w in zip(path, values):
                target[(tid, i)] = _window(w, f"{where}.{name}")
        if default_dwell is not None:
            for i in path:
                params.dwell.setdefault((tid, i), default_dwell)
        if t.get("travel") is not None:
            params.travel[tid] = _window(t["travel"], f"{where}.travel")

    def train_ref(ref: Any, where: str) -> str:
        ref = str(ref)
        if ref not in trains:
            raise DanglingReferenceError("train", ref, where)
        return ref

    omega = []
    for k, pair in enumerate(doc.get("omega", [])):
        where = f"omega[{k}]"
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise InstanceError("expected a platform pair", where)
        omega.append((plat(pair[0], where), plat(pair[1], where)))

    def links(key: str, window_key: str, target: dict[TrainLink, Window]) -> tuple[TrainLink, ...]:
        out = []
        for k, e in enumerate(doc.get(key, [])):
            where = f"{key}[{k}]"
            link = TrainLink(
                plat(_require(e, "from", where), where),
                plat(_require(e, "to", where), where),
                train_ref(_require(e, "train", where), where),
                train_ref(_require(e, "next_train", where), where),
            )
            out.append(link)
            target[link] = _window(_require(e, window_key, where), f"{where}.{window_key}")
        return tuple(out)

    net = RailNetwork(
        stations=tuple(stations),
        platforms=platforms,
        tracks=tracks,
        crossing_overs=crossing_overs,
        trains=trains,
        omega=tuple(omega),
        connections=links("connections", "window", params.connection),
        turnarounds=links("turnarounds", "window", params.turnaround),
        headways=links("headways", "headway", params.headway),
    )
    return net, params


def network_to_dict(net: RailNetwork, params: ModelParams) -> dict[str, Any]:
    """Inverse of `load_network` (without ``initial_timetable``)."""

    def pair(w: Window) -> list[float]:
        return [w[0], w[1]]

    trains = []
    for t in net.trains.values():
        rec: dict[str, Any] = {"id": t.id, "path": list(t.path)}
        trips = [params.trip.get((t.id, a.start, a.end)) for a in t.tracks]
        if all(w is not None for w in trips) and trips:
            rec["trip"] = [pair(w) for w in trips]
        for name, src in (("dwell", params.dwell), ("accel", params.accel), ("brake", params.brake)):
            values = [src.get((t.id, i)) for i in t.path]
            if all(w is not None for w in values):
                rec[name] = [pair(w) for w in values]
        if t.id in params.travel:
            rec["travel"] = pair(params.travel[t.id])
        trains.append(rec)

    def links(items: Iterable[TrainLink], key: str, src: Mapping[TrainLink, Window]) -> list[dict[str, Any]]:
        return [
            {"from": x.start, "to": x.end, "train": x.train, "next_train": x.next_train, key: pair(src[x])}
            for x in items
        ]

    defaults: dict[str, Any] = {}
    if params.default_accel is not None:
        defaults["accel"] = pair(params.default_accel)
    if params.default_brake is not None:
        defaults["brake"] = pair(params.default_brake)
    out_params: dict[str, Any] = {
        "r": params.r,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "big_m": params.big_m,
        "horizon": params.horizon,
    }
    if defaults:
        out_params["defaults"] = defaults
    return {
        "stations": [{"id": s} for s in net.stations],
        "platforms": [{"id": p.id, "station": p.station, "line": p.line} for p in net.platforms.values()],
        "tracks": [{"from": a.start, "to": a.end} for a in net.tracks],
        "crossing_overs": [{"from": c.start, "to": c.end} for c in net.crossing_overs],
        "trains": trains,
        "omega": [list(p) for p in net.omega],
        "connections": links(net.connections, "window", params.connection),
        "turnarounds": links(net.turnarounds, "window", params.turnaround),
        "headways": links(net.headways, "headway", params.headway),
        "params": out_params,
    }


# --------------------------------------------------------------------------
# structural validation


def _line_is_path(platforms: list[str], arcs: list[Track]) -> bool:
    if len(arcs) != len(platforms) - 1:
        return False
    succ = {}
    indeg = {p: 0 for p in platforms}
    for a in arcs:
        if a.start in succ:
            return False
        succ[a.start] = a.end
        indeg[a.end] += 1
    heads = [p for p, d in indeg.items() if d == 0]
    if len(heads) != 1 or any(d > 1 for d in indeg.values()):
        return False
    seen, cur = {heads[0]}, heads[0]
    while cur in succ:
        cur = succ[cur]
        if cur in seen:
            return False
        seen.add(cur)
    return len(seen) == len(platforms)


def validate_network(net: RailNetwork) -> list[Issue]:
    """Check every structural invariant; an empty list means the network is sound."""
    issues: list[Issue] = []

    def add(code: str, message: str, *ids: str) -> None:
        issues.append(Issue(code, message, ids))

    arcset = set()
    for a in net.tracks:
        if a.start == a.end:
            add("track-self-loop", f"track {a.start}->{a.end} starts and ends at one platform", a.start)
        elif net.opposite(a.start, a.end):
            add("track-opposite", f"track {a.start}->{a.end} joins opposite platforms", a.start, a.end)
        if (a.start, a.end) in arcset:
            add("duplicate-track", f"track {a.start}->{a.end} listed twice", a.start, a.end)
        arcset.add((a.start, a.end))

    for line, members in sorted(net.lines.items()):
        members_set = set(members)
        arcs = [a for a in net.tracks if a.start in members_set and a.end in members_set]
        if len(members) > 1 and not _line_is_path(members, arcs):
            add("line-not-path", f"line {line} is not a directed path", line)

    for c in net.crossing_overs:
        if net.platforms[c.start].line == net.platforms[c.end].line:
            add("crossing-over-same-line", f"crossing-over {c.start}->{c.end} stays on one line", c.start, c.end)

    for t in net.trains.values():
        if len(t.path) < 2:
            add("path-too-short", f"train {t.id} visits fewer than 2 platforms", t.id)
        for a in t.tracks:
            if (a.start, a.end) not in arcset:
                add("path not a directed path", f"train {t.id}: no track {a.start}->{a.end}", t.id, a.start, a.end)

    for i, j in net.omega:
        if not net.opposite(i, j):
            add("omega-pair not opposite", f"({i}, {j}) are not opposite platforms of one station", i, j)

    def visits(train: str, platform: str) -> bool:
        return platform in net.trains[train].path

    for link in net.connections:
        if not (visits(link.train, link.start) and visits(link.next_train, link.end)):
            add("connection-not-visited", f"connection {link} names a platform its train does not visit", link.train, link.next_train)
        elif net.platforms[link.start].station != net.platforms[link.end].station:
            add("connection-not-same-station", f"connection platforms {link.start}, {link.end} lie at different stations", link.start, link.end)
    cross = {(c.start, c.end) for c in net.crossing_overs}
    for link in net.turnarounds:
        if (link.start, link.end) not in cross:
            add("turnaround-unknown-crossing", f"no crossing-over {link.start}->{link.end}", link.start, link.end)
        if link.train == link.next_train:
            add("turnaround-same-train", f"turn-around links train {link.train} to itself", link.train)
        if net.trains[link.train].last != link.start or net.trains[link.next_train].first != link.end:
            add("turnaround-not-terminal", f"turn-around {link} does not join a path end to a path start", link.train, link.next_train)
    for link in net.headways:
        arc = Track(link.start, link.end)
        for tid in (link.train, link.next_train):
            if arc not in net.trains[tid].tracks:
                add("headway-track-not-used", f"train {tid} does not traverse {link.start}->{link.end}", tid)
    return issues


def validate_params(net: RailNetwork, p: ModelParams) -> list[Issue]:
    """Check window ordering, non-negative durations and the global constants."""
    issues: list[Issue] = []

    def check(name: str, key: Any, w: Window) -> None:
        if not (math.isfinite(w[0]) and math.isfinite(w[1])):
            issues.append(Issue("window-not-finite", f"{name} {key}: bounds must be finite"))
        elif w[0] > w[1]:
            issues.append(Issue("window-inverted", f"{name} {key}: lower bound {w[0]} exceeds upper bound {w[1]}"))
        elif w[0] < 0:
            issues.append(Issue("negative-duration", f"{name} {key}: negative lower bound {w[0]}"))

    for name, table in (
        ("trip", p.trip), ("dwell", p.dwell), ("travel", p.travel), ("connection", p.connection),
        ("turnaround", p.turnaround), ("accel", p.accel), ("brake", p.brake),
    ):
        for key, w in table.items():
            check(name, key, w)
    for key, (hi, hj) in p.headway.items():
        if hi < 0 or hj < 0:
            issues.append(Issue("negative-duration", f"headway {key}: negative headway"))
    for name, w in (("default accel", p.default_accel), ("default brake", p.default_brake)):
        if w is not None:
            check(name, "", w)

    for t in net.trains.values():
        for a in t.tracks:
            if (t.id, a.start, a.end) not in p.trip:
                issues.append(Issue("missing-window", f"no trip window for train {t.id} on {a.start}->{a.end}", (t.id,)))
        for i in t.path:
            if (t.id, i) not in p.dwell:
                issues.append(Issue("missing-window", f"no dwell window for train {t.id} at {i}", (t.id, i)))

    if not p.r > 0:
        issues.append(Issue("r-nonpositive", f"r must be positive, got {p.r}"))
    if not 0 < p.epsilon < 1:
        issues.append(Issue("epsilon-range", f"epsilon must lie in (0, 1), got {p.epsilon}"))
    if p.delta is not None and p.delta < 0:
        issues.append(Issue("delta-negative", f"deviation bound must be non-negative, got {p.delta}"))
    if p.big_m is not None and not p.big_m > 0:
        issues.append(Issue("big-m-nonpositive", f"global big-M must be positive, got {p.big_m}"))
    return issues
