"""Event times, feasibility checking and closed-form overlap evaluation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from .network import ModelParams, RailNetwork

if TYPE_CHECKING:
    from .spstp import SyncPair

FEASIBILITY_TOL = 1e-6

FAMILIES = ("trip", "dwell", "connection", "turnaround", "headway", "total-travel")


class MissingEventError(KeyError):
    def __init__(self, train: str, platform: str):
        self.train = train
        self.platform = platform
        super().__init__(f"no event time for train {train} at platform {platform}")

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class Timetable:
    """Arrival and departure time of each train at each platform it visits."""

    arrival: Mapping[tuple[str, str], float] = field(default_factory=dict)
    departure: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def a(self, train: str, platform: str) -> float:
        try:
            return self.arrival[(train, platform)]
        except KeyError:
            raise MissingEventError(train, platform) from None

    def d(self, train: str, platform: str) -> float:
        try:
            return self.departure[(train, platform)]
        except KeyError:
            raise MissingEventError(train, platform) from None

    def keys(self) -> list[tuple[str, str]]:
        return sorted(set(self.arrival) | set(self.departure))

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {"train_id": t, "platform_id": i, "arrival_s": self.arrival[(t, i)], "departure_s": self.departure[(t, i)]}
            for t, i in self.keys()
        ]

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> "Timetable":
        arr, dep = {}, {}
        for rec in records:
            key = (str(rec["train_id"]), str(rec["platform_id"]))
            arr[key] = float(rec["arrival_s"])
            dep[key] = float(rec["departure_s"])
        return cls(arr, dep)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["train_id", "platform_id", "arrival_s", "departure_s"], lineterminator="\n")
        writer.writeheader()
        for rec in self.to_records():
            writer.writerow({**rec, "arrival_s": _fmt(rec["arrival_s"]), "departure_s": _fmt(rec["departure_s"])})
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Timetable":
        return cls.from_records(csv.DictReader(io.StringIO(text)))


def _fmt(x: float) -> str:
    # round away float noise from the LP without losing sub-millisecond data
    return repr(round(x, 9) + 0.0)


@dataclass(frozen=True)
class Violation:
    family: str
    ids: tuple[str, ...]
    slack: float

    def __str__(self) -> str:
        return f"{self.family} {' '.join(self.ids)} slack={self.slack:.6g}"


def validate_timetable(
    tt: Timetable, net: RailNetwork, p: ModelParams, tol: float = FEASIBILITY_TOL
) -> list[Violation]:
    """List every violated operational inequality with its signed slack.

    The report is empty iff the timetable satisfies the trip, dwell,
    connection, turn-around, headway and total-travel windows (each to
    within ``tol`` seconds).  A missing event raises `MissingEventError`.
    """
    for t, i in net.events():
        tt.a(t, i), tt.d(t, i)
    out: list[Violation] = []

    def window(family: str, ids: tuple[str, ...], value: float, lo: float, hi: float) -> None:
        if value - lo < -tol:
            out.append(Violation(family, ids, value - lo))
        if hi - value < -tol:
            out.append(Violation(family, ids, hi - value))

    for t in sorted(net.trains.values(), key=lambda t: t.id):
        for arc in t.tracks:
            w = p.trip.get((t.id, arc.start, arc.end))
            if w is not None:
                window("trip", (t.id, arc.start, arc.end), tt.a(t.id, arc.end) - tt.d(t.id, arc.start), *w)
        for i in t.path:
            w = p.dwell.get((t.id, i))
            if w is not None:
                window("dwell", (t.id, i), tt.d(t.id, i) - tt.a(t.id, i), *w)
        w = p.travel.get(t.id)
        if w is not None:
            window("total-travel", (t.id,), tt.a(t.id, t.last) - tt.d(t.id, t.first), *w)

    for link in net.connections:
        w = p.connection[link]
        window(
            "connection", (link.start, link.end, link.train, link.next_train),
            tt.d(link.next_train, link.end) - tt.a(link.train, link.start), *w,
        )
    for link in net.turnarounds:
        w = p.turnaround[link]
        window(
            "turnaround", (link.start, link.end, link.train, link.next_train),
            tt.a(link.next_train, link.end) - tt.d(link.train, link.start), *w,
        )
    for link in net.headways:
        hi, hj = p.headway[link]
        ids = (link.start, link.end, link.train, link.next_train)
        gap_i = tt.d(link.next_train, link.start) - tt.d(link.train, link.start)
        gap_j = tt.d(link.next_train, link.end) - tt.d(link.train, link.end)
        if gap_i - hi < -tol:
            out.append(Violation("headway", ids + (link.start,), gap_i - hi))
        if gap_j - hj < -tol:
            out.append(Violation("headway", ids + (link.end,), gap_j - hj))
    return out


def overlap_closed_form(d_i: float, a_j: float, alpha_lb: float, beta_lb: float) -> float:
    """Overlap of the acceleration ``[d_i, d_i + alpha_lb]`` with the braking ``[a_j - beta_lb, a_j]``."""
    x = a_j - d_i
    return max(0.0, min(alpha_lb, beta_lb, alpha_lb + beta_lb - x, x))


def pair_overlap(tt: Timetable, pair: "SyncPair") -> float:
    return overlap_closed_form(
        tt.d(pair.accel_train, pair.accel_platform),
        tt.a(pair.brake_train, pair.brake_platform),
        pair.alpha_lb,
        pair.beta_lb,
    )


def total_overlap(tt: Timetable, pairs: Iterable["SyncPair"]) -> float:
    return sum((pair_overlap(tt, pair) for pair in pairs), 0.0)
