"""Energy accounting with constant-power acceleration and braking phases.

Traction energy of a departure is ``P_a * alpha_lb``; a synchronized pair
passes ``min(P_a, eta * P_b) * sigma`` to the accelerating train.  With
constant power the time integrals are exact rectangles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .network import ModelParams
from .spstp import SyncPair
from .timetable import Timetable, pair_overlap

KJ_PER_KWH = 3600.0
SIGMA_SLACK = 1e-6


class EnergyError(ValueError):
    pass


@dataclass
class PowerParams:
    accel_power: float = 2000.0  # kW
    regen_power: float = 1500.0  # kW
    efficiency: float = 0.9
    base_energy_per_trip: float = 0.0  # kWh
    accel_power_by_event: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.accel_power > 0 and self.regen_power > 0):
            raise EnergyError("powers must be positive")
        if not 0 < self.efficiency <= 1:
            raise EnergyError("efficiency must lie in (0, 1]")
        if any(v <= 0 for v in self.accel_power_by_event.values()):
            raise EnergyError("powers must be positive")

    def p_accel(self, train: str, platform: str) -> float:
        return self.accel_power_by_event.get((train, platform), self.accel_power)


def transferred_energy(sigma: float, pp: PowerParams, accel_power: Optional[float] = None) -> float:
    """kWh handed over during ``sigma`` seconds of overlap."""
    if sigma < 0:
        raise EnergyError(f"negative overlap {sigma}")
    p_a = pp.accel_power if accel_power is None else accel_power
    return min(p_a, pp.efficiency * pp.regen_power) * sigma / KJ_PER_KWH


@dataclass
class PairEnergy:
    pair: str
    direction: str
    sigma: float
    transferred_kwh: float


@dataclass
class EnergyReport:
    traction_kwh: float
    transferred_kwh: float
    total_overlap_s: float
    pairs: list[PairEnergy] = field(default_factory=list)

    @property
    def effective_kwh(self) -> float:
        return self.traction_kwh - self.transferred_kwh


def effective_consumption(
    tt: Timetable,
    pairs: Iterable[SyncPair],
    sigma: Optional[Mapping[tuple[str, str, str], float]],
    pp: PowerParams,
    p: ModelParams,
) -> EnergyReport:
    """Traction, transferred and effective energy of a timetable.

    ``sigma`` holds solver overlaps per pair key; None evaluates every pair
    at its closed-form overlap in ``tt``.  An overlap larger than the
    timetable allows raises `EnergyError`.
    """
    traction = 0.0
    trips: dict[str, int] = {}
    for t, i in tt.keys():
        traction += pp.p_accel(t, i) * p.accel_lb(t, i) / KJ_PER_KWH
        trips[t] = trips.get(t, 0) + 1
    traction += pp.base_energy_per_trip * sum(n - 1 for n in trips.values())

    detail = []
    for q in sorted(pairs, key=lambda q: q.key):
        possible = pair_overlap(tt, q)
        s = possible if sigma is None else sigma[q.key]
        if s > possible + SIGMA_SLACK:
            raise EnergyError(f"pair {q.name}: overlap {s:.6g} s exceeds the {possible:.6g} s the timetable allows")
        s = max(s, 0.0)
        kwh = transferred_energy(s, pp, pp.p_accel(q.accel_train, q.accel_platform))
        detail.append(PairEnergy(q.name, q.direction, s, kwh))
    return EnergyReport(
        traction,
        sum(e.transferred_kwh for e in detail),
        sum(e.sigma for e in detail),
        detail,
    )


def reduction_percent(before_kwh: float, after_kwh: float) -> float:
    if before_kwh == 0:
        raise EnergyError("reference energy is zero")
    return 100.0 * (before_kwh - after_kwh) / before_kwh


@dataclass
class Comparison:
    reduction_percent: float
    rows: list[tuple[str, float, float, float]]

    def table(self) -> str:
        out = ["quantity,before,after,delta"]
        out += [f"{name},{b:.6f},{a:.6f},{a - b:.6f}" for name, b, a, _ in self.rows]
        out.append(f"reduction_percent,,,{self.reduction_percent:.6f}")
        return "\n".join(out) + "\n"


def compare_reports(before: EnergyReport, after: EnergyReport) -> Comparison:
    """Percent reduction in effective consumption (negative if it rose) plus a before/after table."""
    pct = reduction_percent(before.effective_kwh, after.effective_kwh)
    rows = [
        (name, b, a, a - b)
        for name, b, a in (
            ("total_overlap_s", before.total_overlap_s, after.total_overlap_s),
            ("traction_kwh", before.traction_kwh, after.traction_kwh),
            ("transferred_kwh", before.transferred_kwh, after.transferred_kwh),
            ("effective_kwh", before.effective_kwh, after.effective_kwh),
        )
    ]
    return Comparison(pct, rows)


TABLE_HEADER = (
    "trains,constraints,binaries,continuous,cpu_time_s,nodes,"
    "initial_overlap_s,final_overlap_s,initial_effective_kwh,final_effective_kwh,reduction_percent"
)


def table_row(
    n_trains: int, n_rows: int, n_binaries: int, n_continuous: int, cpu_time: float, nodes: int,
    before: EnergyReport, after: EnergyReport,
) -> str:
    """One line in the layout of the published results table."""
    pct = compare_reports(before, after).reduction_percent
    return (
        f"{n_trains},{n_rows},{n_binaries},{n_continuous},{cpu_time:.2f},{nodes},"
        f"{before.total_overlap_s:.2f},{after.total_overlap_s:.2f},"
        f"{before.effective_kwh:.2f},{after.effective_kwh:.2f},{pct:.2f}"
    )
