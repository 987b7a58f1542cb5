"""Assembly of the mixed-integer program and its MPS export.

Rows are built symbolically: coefficients are keyed by variable keys
``("a", train, platform)``, ``("d", train, platform)``, ``("sigma", i, j, t)``
and ``("lambda", i, j, t)``; `build_model` assigns column indices.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Literal, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .network import ModelParams, RailNetwork, TrainLink
from .spstp import SyncPair
from .timetable import Timetable

VarKey = tuple[str, ...]
Sense = Literal["<=", ">=", "="]

EVENT_KINDS = ("a", "d")

# row-name prefixes for the MPS file, one per family
FAMILY_TAGS = {
    "eq5": "E05",
    "eq23": "E23",
    "lemma1-6": "A06",
    "lemma1-7": "A07",
    "lemma1-9": "A09",
    "lemma1-10": "A10",
    "lemma1-11": "A11",
    "lemma1-12": "A12",
    "lemma2-24": "B24",
    "lemma2-25": "B25",
    "lemma2-27": "B27",
    "lemma2-28": "B28",
    "lemma2-29": "B29",
    "lemma2-30": "B30",
    "trip": "TRP",
    "dwell": "DWL",
    "conn": "CON",
    "turn": "TRN",
    "headway": "HDW",
    "travel": "TRV",
}

_LEMMA_FAMILIES = {
    "right": ("lemma1-6", "lemma1-7", "lemma1-9", "lemma1-10", "lemma1-11", "lemma1-12"),
    "left": ("lemma2-24", "lemma2-25", "lemma2-27", "lemma2-28", "lemma2-29", "lemma2-30"),
}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    key: VarKey
    lo: float = 0.0
    hi: float = math.inf
    binary: bool = False

    @property
    def kind(self) -> str:
        return {"a": "arrival", "d": "departure"}.get(self.key[0], self.key[0])


@dataclass(frozen=True)
class Row:
    coeffs: tuple[tuple[VarKey, float], ...]
    sense: Sense
    rhs: float
    family: str
    label: str = ""

    def value(self, values: Mapping[VarKey, float]) -> float:
        return sum(c * values[k] for k, c in self.coeffs)

    def slack(self, values: Mapping[VarKey, float]) -> float:
        """Signed slack; negative means the row is violated."""
        lhs = self.value(values)
        if self.sense == "<=":
            return self.rhs - lhs
        if self.sense == ">=":
            return lhs - self.rhs
        return -abs(lhs - self.rhs)


def _row(terms: Iterable[tuple[VarKey, float]], sense: Sense, rhs: float, family: str, label: str = "") -> Row:
    merged: dict[VarKey, float] = {}
    for k, c in terms:
        merged[k] = merged.get(k, 0.0) + c
    return Row(tuple((k, c) for k, c in merged.items() if c != 0.0), sense, float(rhs), family, label)


def event_keys(pair: SyncPair) -> tuple[VarKey, VarKey]:
    """(departure of the accelerating train, arrival of the braking train)."""
    return ("d", pair.accel_train, pair.accel_platform), ("a", pair.brake_train, pair.brake_platform)


def sigma_key(pair: SyncPair) -> VarKey:
    return ("sigma",) + pair.key


def lambda_key(pair: SyncPair) -> VarKey:
    return ("lambda",) + pair.key


# --------------------------------------------------------------------------
# emitters


def emit_order_constraints(pairs: Iterable[SyncPair]) -> list[Row]:
    """Keep each partner on its side of t: the midpoint-sum difference keeps the sign it had initially.

    The fractional form has a constant positive denominator, so multiplying
    through leaves a sign condition on the numerator.
    """
    rows = []
    for q in pairs:
        if q.denom_sign != 1:
            raise ModelError(f"pair {q.name}: order denominator must be positive")
        ahead = [("a", q.t_tilde, q.j), ("d", q.t_tilde, q.j)]
        behind = [("a", q.t, q.i), ("d", q.t, q.i)]
        if q.direction == "left":
            ahead, behind = behind, ahead
        rows.append(
            _row([(k, 1.0) for k in ahead] + [(k, -1.0) for k in behind], ">=", 0.0,
                 "eq5" if q.direction == "right" else "eq23", q.name)
        )
    return rows


def _indicator_rows(pair: SyncPair, big_m: float, epsilon: float, families: Sequence[str]) -> list[Row]:
    d, a = event_keys(pair)
    s, lam = sigma_key(pair), lambda_key(pair)
    al, be, m = pair.alpha_lb, pair.beta_lb, big_m
    f6, f7, f9, f10, f11, f12 = families
    return [
        # braking ends before the acceleration window closes
        _row([(a, 1.0), (d, -1.0), (lam, m)], "<=", al + be + m - epsilon, f6, pair.name),
        # braking ends after the departure
        _row([(d, 1.0), (a, -1.0), (lam, m)], "<=", m - epsilon, f7, pair.name),
        _row([(s, 1.0), (lam, -al)], "<=", 0.0, f9, pair.name),
        _row([(s, 1.0), (lam, -be)], "<=", 0.0, f10, pair.name),
        _row([(s, 1.0), (d, -1.0), (a, 1.0), (lam, m)], "<=", al + be + m, f11, pair.name),
        _row([(s, 1.0), (a, -1.0), (d, 1.0), (lam, m)], "<=", m, f12, pair.name),
    ]


def emit_lemma1_constraints(pair: SyncPair, big_m: float, epsilon: float) -> list[Row]:
    """Indicator rows of a right pair: t accelerates out of i, the partner brakes into j.

    sigma >= 0 is carried by the variable bound, not by a row.
    """
    if pair.direction != "right":
        raise ModelError(f"pair {pair.name} is not a right pair")
    return _indicator_rows(pair, big_m, epsilon, _LEMMA_FAMILIES["right"])


def emit_lemma2_constraints(pair: SyncPair, big_m: float, epsilon: float) -> list[Row]:
    """Mirror image of `emit_lemma1_constraints` for a left pair (partner accelerates out of j)."""
    if pair.direction != "left":
        raise ModelError(f"pair {pair.name} is not a left pair")
    return _indicator_rows(pair, big_m, epsilon, _LEMMA_FAMILIES["left"])


def _window_rows(expr: list[tuple[VarKey, float]], window: tuple[float, float], family: str, label: str) -> list[Row]:
    lo, hi = window
    if lo > hi:
        raise ModelError(f"{family} window {label}: lower bound {lo} exceeds upper bound {hi}")
    return [_row(expr, ">=", lo, family, label), _row(expr, "<=", hi, family, label)]


def emit_operational_constraints(net: RailNetwork, p: ModelParams) -> list[Row]:
    rows: list[Row] = []
    trains = sorted(net.trains.values(), key=lambda t: t.id)
    for t in trains:
        for arc in t.tracks:
            w = p.trip.get((t.id, arc.start, arc.end))
            if w is None:
                raise ModelError(f"no trip window for train {t.id} on {arc.start}->{arc.end}")
            rows += _window_rows([(("a", t.id, arc.end), 1.0), (("d", t.id, arc.start), -1.0)], w, "trip",
                                 f"{t.id}:{arc.start}->{arc.end}")
    for t in trains:
        for i in t.path:
            w = p.dwell.get((t.id, i))
            if w is None:
                raise ModelError(f"no dwell window for train {t.id} at {i}")
            rows += _window_rows([(("d", t.id, i), 1.0), (("a", t.id, i), -1.0)], w, "dwell", f"{t.id}:{i}")

    def link_label(x: TrainLink) -> str:
        return f"{x.train}->{x.next_train}:{x.start}->{x.end}"

    for x in net.connections:
        rows += _window_rows([(("d", x.next_train, x.end), 1.0), (("a", x.train, x.start), -1.0)],
                             p.connection[x], "conn", link_label(x))
    for x in net.turnarounds:
        rows += _window_rows([(("a", x.next_train, x.end), 1.0), (("d", x.train, x.start), -1.0)],
                             p.turnaround[x], "turn", link_label(x))
    for x in net.headways:
        h_i, h_j = p.headway[x]
        rows.append(_row([(("d", x.next_train, x.start), 1.0), (("d", x.train, x.start), -1.0)], ">=", h_i,
                         "headway", link_label(x)))
        rows.append(_row([(("d", x.next_train, x.end), 1.0), (("d", x.train, x.end), -1.0)], ">=", h_j,
                         "headway", link_label(x)))
    for t in trains:
        w = p.travel.get(t.id)
        if w is not None:
            rows += _window_rows([(("a", t.id, t.last), 1.0), (("d", t.id, t.first), -1.0)], w, "travel", t.id)
    return rows


def compute_bigM(
    pair: SyncPair,
    bounds: Mapping[VarKey, tuple[float, float]],
    epsilon: float,
    global_m: Optional[float] = None,
) -> float:
    """Smallest M that leaves the pair's big-M rows slack when its indicator is 0.

    With x = (braking arrival) - (accelerating departure) ranging over
    [x_min, x_max] by interval arithmetic on the event bounds, the four rows
    need M >= x_max + eps - alpha - beta, -x_min + eps, x_max - alpha - beta
    and -x_min respectively.
    """
    d, a = event_keys(pair)
    d_lo, d_hi = bounds[d]
    a_lo, a_hi = bounds[a]
    x_max, x_min = a_hi - d_lo, a_lo - d_hi
    if not (math.isfinite(x_max) and math.isfinite(x_min)):
        if global_m is None:
            raise ModelError(f"pair {pair.name}: event bounds are unbounded and no global big-M is configured")
        return float(global_m)
    s = pair.alpha_lb + pair.beta_lb
    needed = max(x_max + epsilon - s, -x_min + epsilon, x_max - s, -x_min)
    return max(needed, 0.0)


# --------------------------------------------------------------------------
# the model


@dataclass
class MipModel:
    variables: list[Variable]
    rows: list[Row]
    pairs: list[SyncPair]
    big_m: dict[tuple[str, str, str], float] = field(default_factory=dict)
    epsilon: float = 0.005

    def __post_init__(self) -> None:
        self.index = {v.key: k for k, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            raise ModelError("duplicate variable key")
        for r in self.rows:
            for k, c in r.coeffs:
                if k not in self.index:
                    raise ModelError(f"row {r.family} {r.label} references unknown variable {k}")
                if not math.isfinite(c):
                    raise ModelError(f"row {r.family} {r.label} has a non-finite coefficient")

    @property
    def objective(self) -> dict[VarKey, float]:
        return {v.key: 1.0 for v in self.variables if v.key[0] == "sigma"}

    @property
    def n_binaries(self) -> int:
        return sum(v.binary for v in self.variables)

    @cached_property
    def lambda_columns(self) -> list[int]:
        return [k for k, v in enumerate(self.variables) if v.binary]

    def family_counts(self) -> dict[str, int]:
        return dict(Counter(r.family for r in self.rows))

    @cached_property
    def arrays(self) -> "ModelArrays":
        n = len(self.variables)
        rows, cols, vals = [], [], []
        rlo = np.empty(len(self.rows))
        rhi = np.empty(len(self.rows))
        for r_idx, r in enumerate(self.rows):
            for k, c in r.coeffs:
                rows.append(r_idx)
                cols.append(self.index[k])
                vals.append(c)
            rlo[r_idx] = -np.inf if r.sense == "<=" else r.rhs
            rhi[r_idx] = np.inf if r.sense == ">=" else r.rhs
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.rows), n))
        c = np.zeros(n)
        for k, v in self.objective.items():
            c[self.index[k]] = v
        lo = np.array([v.lo for v in self.variables], dtype=float)
        hi = np.array([v.hi for v in self.variables], dtype=float)
        return ModelArrays(c, A, rlo, rhi, lo, hi)

    def values(self, x: Sequence[float]) -> dict[VarKey, float]:
        return {v.key: float(x[k]) for k, v in enumerate(self.variables)}

    def max_violation(self, x: np.ndarray, skip_integrality: bool = False) -> float:
        """Largest violation of any row, bound or (optionally) integrality at ``x``."""
        arr = self.arrays
        ax = arr.A @ x
        worst = 0.0
        if len(ax):
            worst = max(worst, float(np.max(arr.rlo - ax, initial=0.0)), float(np.max(ax - arr.rhi, initial=0.0)))
        worst = max(worst, float(np.max(arr.lo - x, initial=0.0)), float(np.max(x - arr.hi, initial=0.0)))
        if not skip_integrality and self.lambda_columns:
            lam = x[self.lambda_columns]
            worst = max(worst, float(np.max(np.abs(lam - np.round(lam)))))
        return worst


@dataclass(frozen=True)
class ModelArrays:
    """Dense objective, sparse matrix, row bounds ``rlo <= A x <= rhi`` and column bounds."""

    c: np.ndarray
    A: sparse.csr_matrix
    rlo: np.ndarray
    rhi: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def event_bounds(net: RailNetwork, p: ModelParams, tt0: Optional[Timetable]) -> dict[VarKey, tuple[float, float]]:
    out = {}
    for t, i in net.events():
        for kind in EVENT_KINDS:
            lo, hi = 0.0, math.inf
            if p.delta is not None:
                if tt0 is None:
                    raise ModelError("a deviation bound needs the initial timetable")
                init = tt0.a(t, i) if kind == "a" else tt0.d(t, i)
                lo, hi = max(0.0, init - p.delta), init + p.delta
            if p.horizon is not None:
                hi = min(hi, p.horizon)
            out[(kind, t, i)] = (lo, hi)
    return out


def build_model(
    net: RailNetwork,
    p: ModelParams,
    pairs: Iterable[SyncPair],
    tt0: Optional[Timetable] = None,
) -> MipModel:
    """Collect variables and every row family into one model.

    ``p.big_m`` set means one global M for every pair; otherwise M is
    computed per pair from the event bounds.
    """
    pairs = sorted(pairs, key=lambda q: q.key)
    if len({q.key for q in pairs}) != len(pairs):
        raise ModelError("more than one pair per (i, j, t)")
    bounds = event_bounds(net, p, tt0)
    variables = [Variable(k, lo, hi) for k, (lo, hi) in bounds.items()]
    variables += [Variable(sigma_key(q), 0.0, math.inf) for q in pairs]
    variables += [Variable(lambda_key(q), 0.0, 1.0, binary=True) for q in pairs]

    rows = emit_operational_constraints(net, p)
    rows += emit_order_constraints(pairs)
    big_m = {}
    for q in pairs:
        m = p.big_m if p.big_m is not None else compute_bigM(q, bounds, p.epsilon)
        big_m[q.key] = m
        emit = emit_lemma1_constraints if q.direction == "right" else emit_lemma2_constraints
        rows += emit(q, m, p.epsilon)
    return MipModel(variables, rows, pairs, big_m, p.epsilon)


def model_stats(model: MipModel) -> dict[str, Any]:
    counts = model.family_counts()
    ms = np.array(list(model.big_m.values()), dtype=float)
    hist: dict[str, int] = {}
    if len(ms):
        edges = np.histogram_bin_edges(ms, bins=min(10, max(1, len(set(ms.tolist())))))
        hist_counts, _ = np.histogram(ms, bins=edges)
        hist = {f"{lo:.3f}-{hi:.3f}": int(n) for lo, hi, n in zip(edges, edges[1:], hist_counts)}
    kinds = Counter(v.kind for v in model.variables)
    return {
        "rows": len(model.rows),
        "variables": len(model.variables),
        "binaries": model.n_binaries,
        "continuous": len(model.variables) - model.n_binaries,
        "variables_by_kind": dict(sorted(kinds.items())),
        "rows_by_family": dict(sorted(counts.items())),
        "pairs_right": sum(q.direction == "right" for q in model.pairs),
        "pairs_left": sum(q.direction == "left" for q in model.pairs),
        "big_m": {
            "min": float(ms.min()) if len(ms) else None,
            "max": float(ms.max()) if len(ms) else None,
            "histogram": hist,
        },
    }


# --------------------------------------------------------------------------
# MPS


def _mps_number(v: float) -> str:
    for digits in range(15, 5, -1):
        s = f"{v:.{digits}g}"
        if len(s) <= 12:
            return s
    raise ModelError(f"cannot fit {v!r} into a 12-character MPS field")


def mps_names(model: MipModel) -> tuple[list[str], list[str]]:
    """Eight-character column and row names: kind/family tag plus a counter."""
    col_prefix = {"a": "A", "d": "D", "sigma": "S", "lambda": "L"}
    counters: Counter[str] = Counter()
    cols = []
    for v in model.variables:
        tag = col_prefix[v.key[0]]
        counters[tag] += 1
        cols.append(f"{tag}{counters[tag]:07d}")
    counters.clear()
    rows = []
    for r in model.rows:
        tag = FAMILY_TAGS[r.family]
        counters[tag] += 1
        rows.append(f"{tag}{counters[tag]:05d}")
    for names in (cols, rows):
        if len(set(names)) != len(names) or any(len(n) > 8 for n in names):
            raise ModelError("MPS name collision")
    return cols, rows


def export_mps(model: MipModel, name: str = "REGENSYN") -> str:
    """Fixed-format MPS with an OBJSENSE MAX section and the indicators in one integer block."""
    cols, rows = mps_names(model)
    sense_code = {"<=": "L", ">=": "G", "=": "E"}
    out = [f"NAME          {name[:8]}", "OBJSENSE", "    MAX", "ROWS", " N  OBJ"]
    for r, rn in zip(model.rows, rows):
        out.append(f" {sense_code[r.sense]}  {rn}")

    by_col: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    obj = model.objective
    for k, v in enumerate(model.variables):
        if v.key in obj:
            by_col[k].append(("OBJ", obj[v.key]))
    for r, rn in zip(model.rows, rows):
        for key, c in r.coeffs:
            by_col[model.index[key]].append((rn, c))

    def field_line(col: str, row: str, value: float) -> str:
        return f"    {col:<8}  {row:<8}  {_mps_number(value):>12}"

    out.append("COLUMNS")
    in_int = False
    for k, v in enumerate(model.variables):
        if v.binary and not in_int:
            out.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not v.binary and in_int:
            out.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = by_col[k] or [("OBJ", 0.0)]
        for rn, c in entries:
            out.append(field_line(cols[k], rn, c))
    if in_int:
        out.append("    MARKER                 'MARKER'                 'INTEND'")

    out.append("RHS")
    for r, rn in zip(model.rows, rows):
        if r.rhs != 0.0:
            out.append(field_line("RHS", rn, r.rhs))

    out.append("BOUNDS")
    for k, v in enumerate(model.variables):
        if v.binary:
            out.append(f" UP BND       {cols[k]:<8}  {_mps_number(1.0):>12}")
            continue
        if v.lo != 0.0:
            if math.isinf(v.lo):
                out.append(f" MI BND       {cols[k]:<8}")
            else:
                out.append(f" LO BND       {cols[k]:<8}  {_mps_number(v.lo):>12}")
        if math.isfinite(v.hi):
            out.append(f" UP BND       {cols[k]:<8}  {_mps_number(v.hi):>12}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"
