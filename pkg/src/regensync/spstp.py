"""Selection of suitable train pairs from the initial timetable.

For every opposite platform pair (i, j) and every train t calling at i, the
partner is the train calling at j whose dwell midpoint is nearest to t's,
searched separately ahead of t (right) and behind t (left) within a window
of ``r`` seconds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

from .network import ModelParams, RailNetwork
from .timetable import Timetable

Direction = Literal["right", "left"]


@dataclass(frozen=True)
class SyncPair:
    i: str
    j: str
    t: str
    t_tilde: str
    direction: Direction
    alpha_lb: float
    beta_lb: float
    denom_sign: int = 1
    mid_diff: float = 0.0

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.i, self.j, self.t)

    @property
    def name(self) -> str:
        return f"{self.i}|{self.j}|{self.t}|{self.t_tilde}"

    # right: t accelerates out of i while t_tilde brakes into j;
    # left: t brakes into i while t_tilde accelerates out of j.
    @property
    def accel_train(self) -> str:
        return self.t if self.direction == "right" else self.t_tilde

    @property
    def accel_platform(self) -> str:
        return self.i if self.direction == "right" else self.j

    @property
    def brake_train(self) -> str:
        return self.t_tilde if self.direction == "right" else self.t

    @property
    def brake_platform(self) -> str:
        return self.j if self.direction == "right" else self.i


def midpoint(tt0: Timetable, t: str, i: str) -> float:
    return (tt0.a(t, i) + tt0.d(t, i)) / 2.0


def _closest(tt0: Timetable, net: RailNetwork, i: str, j: str, t: str, r: float, side: Direction) -> Optional[tuple[str, float]]:
    ref = midpoint(tt0, t, i)
    best: Optional[tuple[float, str]] = None
    for cand in net.trains_at(j):
        if cand == t:
            continue
        diff = midpoint(tt0, cand, j) - ref
        ok = 0 <= diff <= r if side == "right" else 0 < -diff <= r
        if ok and (best is None or (abs(diff), cand) < best):
            best = (abs(diff), cand)
    if best is None:
        return None
    return best[1], best[0]


def closest_right(tt0: Timetable, net: RailNetwork, i: str, j: str, t: str, r: float) -> Optional[str]:
    hit = _closest(tt0, net, i, j, t, r, "right")
    return hit[0] if hit else None


def closest_left(tt0: Timetable, net: RailNetwork, i: str, j: str, t: str, r: float) -> Optional[str]:
    hit = _closest(tt0, net, i, j, t, r, "left")
    return hit[0] if hit else None


def closest(tt0: Timetable, net: RailNetwork, i: str, j: str, t: str, r: float) -> Optional[tuple[str, Direction]]:
    """Nearer of the right and left partners; an exact tie goes to the right one."""
    right = _closest(tt0, net, i, j, t, r, "right")
    left = _closest(tt0, net, i, j, t, r, "left")
    if right is None and left is None:
        return None
    if left is None or (right is not None and right[1] <= left[1]):
        return right[0], "right"
    return left[0], "left"


def build_sync_pairs(net: RailNetwork, tt0: Timetable, p: ModelParams) -> tuple[list[SyncPair], list[SyncPair]]:
    right: list[SyncPair] = []
    left: list[SyncPair] = []
    for i, j in sorted(set(net.omega)):
        for t in net.trains_at(i):
            hit = closest(tt0, net, i, j, t, p.r)
            if hit is None:
                continue
            other, direction = hit
            diff = midpoint(tt0, other, j) - midpoint(tt0, t, i)
            if direction == "right":
                pair = SyncPair(i, j, t, other, "right", p.accel_lb(t, i), p.brake_lb(other, j), mid_diff=diff)
                right.append(pair)
            else:
                pair = SyncPair(i, j, t, other, "left", p.accel_lb(other, j), p.brake_lb(t, i), mid_diff=diff)
                left.append(pair)
    return right, left


def pairs_table(pairs: list[SyncPair]) -> str:
    lines = ["i,j,t,t_tilde,direction,alpha_lb,beta_lb,mid_diff"]
    for q in sorted(pairs, key=lambda q: q.key):
        lines.append(f"{q.i},{q.j},{q.t},{q.t_tilde},{q.direction},{q.alpha_lb:g},{q.beta_lb:g},{q.mid_diff:g}")
    return "\n".join(lines) + "\n"
