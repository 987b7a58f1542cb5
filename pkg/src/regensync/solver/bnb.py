"""Exact solution of the model: best-bound branch-and-bound and a brute-force oracle."""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from ..mip import MipModel, event_keys, lambda_key, sigma_key
from ..network import RailNetwork
from ..spstp import SyncPair
from ..timetable import Timetable, overlap_closed_form
from .lp import Backend, LpResult, solve_lp

log = logging.getLogger(__name__)

INT_TOL = 1e-6
FEAS_TOL = 1e-7
SIGMA_TOL = 1e-6

SolveStatus = Literal["optimal", "infeasible", "feasible", "no_solution"]


class SolverError(RuntimeError):
    pass


@dataclass
class Budget:
    node_limit: int = 1_000_000
    time_limit: float = 1200.0
    gap: float = 0.0
    threads: int = 1


@dataclass
class SolveStats:
    nodes: int = 0
    lp_solves: int = 0
    wall_time: float = 0.0
    bound: float = math.nan
    gap: float = math.nan

    def as_dict(self) -> dict:
        return {"nodes": self.nodes, "lp_solves": self.lp_solves, "wall_time": self.wall_time,
                "bound": self.bound, "gap": self.gap}


@dataclass
class Solution:
    status: SolveStatus
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    sigma: dict[tuple[str, str, str], float] = field(default_factory=dict)
    lam: dict[tuple[str, str, str], int] = field(default_factory=dict)
    events: dict[tuple[str, str, str], float] = field(default_factory=dict)
    stats: SolveStats = field(default_factory=SolveStats)
    log: list[str] = field(default_factory=list)

    @property
    def has_point(self) -> bool:
        return self.x is not None

    def summary(self) -> dict:
        return {"status": self.status, "objective": self.objective, **self.stats.as_dict()}


def polish(model: MipModel, x: np.ndarray) -> Optional[np.ndarray]:
    """Best indicator/overlap completion of the event times in ``x``.

    Each pair gets lambda = 1 and its closed-form overlap whenever its
    timing rows allow it and the overlap exceeds SIGMA_TOL, else
    lambda = sigma = 0.  Returns None if the completed point is infeasible
    (possible only with a global big-M too small for the event bounds).
    """
    y = np.array(x, dtype=float, copy=True)
    idx = model.index
    eps = model.epsilon
    for q in model.pairs:
        d_key, a_key = event_keys(q)
        gap = y[idx[a_key]] - y[idx[d_key]]
        s = overlap_closed_form(y[idx[d_key]], y[idx[a_key]], q.alpha_lb, q.beta_lb)
        on = (eps - FEAS_TOL <= gap <= q.alpha_lb + q.beta_lb - eps + FEAS_TOL) and s > SIGMA_TOL
        y[idx[sigma_key(q)]] = s if on else 0.0
        y[idx[lambda_key(q)]] = 1.0 if on else 0.0
    if model.max_violation(y) > FEAS_TOL:
        return None
    return y


def _make_solution(model: MipModel, status: SolveStatus, x: np.ndarray, stats: SolveStats, lines: list[str]) -> Solution:
    idx = model.index
    sigma = {q.key: float(x[idx[sigma_key(q)]]) for q in model.pairs}
    lam = {q.key: int(round(x[idx[lambda_key(q)]])) for q in model.pairs}
    events = {v.key: float(x[k]) for k, v in enumerate(model.variables) if v.key[0] in ("a", "d")}
    return Solution(status, float(sum(sigma.values())), x, sigma, lam, events, stats, lines)


def _fractional(model: MipModel, x: np.ndarray) -> list[tuple[float, int]]:
    cols = model.lambda_columns
    if not cols:
        return []
    v = x[cols]
    frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
    return [(float(f), c) for f, c in zip(frac, cols) if f > INT_TOL]


def branch_and_bound(model: MipModel, budget: Optional[Budget] = None, backend: Backend = "auto") -> Solution:
    """Maximize the model exactly, branching on the most fractional indicator.

    Open nodes are taken best bound first.  Every node's LP event times are
    also completed into a feasible point with `polish`, which supplies
    incumbents long before the relaxation turns integral.  The returned
    ``stats.nodes`` counts solved child nodes, so a root solve reports 0.
    """
    budget = budget or Budget()
    start = time.perf_counter()
    stats = SolveStats()
    lines: list[str] = []
    abs_tol = 1e-6

    def lp(fixed: dict[int, int]) -> LpResult:
        stats.lp_solves += 1
        return solve_lp(model, fixed, backend=backend)

    root = lp({})
    if root.status == "infeasible":
        stats.wall_time = time.perf_counter() - start
        return Solution("infeasible", stats=stats, log=["root infeasible"])
    if not root.ok:
        raise SolverError(f"root relaxation failed: {root.status} {root.message}")

    best_x: Optional[np.ndarray] = None
    best = -math.inf
    seq = itertools.count()
    heap: list[tuple[float, int, dict[int, int], LpResult]] = []
    heapq.heappush(heap, (-root.objective, next(seq), {}, root))
    pool = ThreadPoolExecutor(budget.threads) if budget.threads > 1 else None

    def offer(x: Optional[np.ndarray]) -> None:
        nonlocal best, best_x
        if x is None:
            return
        value = float(model.arrays.c @ x)
        if value > best + abs_tol or best_x is None:
            best, best_x = max(value, best), x

    def closed(bound: float) -> bool:
        return bound <= best + max(abs_tol, budget.gap * abs(best))

    exhausted = False
    try:
        while heap:
            neg_bound, node_id, fixed, res = heapq.heappop(heap)
            bound = -neg_bound
            if closed(bound):
                heap.clear()
                break
            frac = _fractional(model, res.x)
            cand = polish(model, res.x)
            offer(cand if cand is not None or frac else res.x)
            lines.append(f"node={node_id} bound={bound:.6f} incumbent={best:.6f} fractional={len(frac)}")
            log.debug(lines[-1])
            if not frac:
                continue
            if closed(bound):
                continue
            _, col = max(frac, key=lambda fc: (fc[0], -fc[1]))
            children = [{**fixed, col: 0}, {**fixed, col: 1}]
            results = list(pool.map(lp, children)) if pool else [lp(ch) for ch in children]
            for ch, r in zip(children, results):
                stats.nodes += 1
                if r.status == "infeasible":
                    continue
                if not r.ok:
                    raise SolverError(f"node relaxation failed: {r.status} {r.message}")
                if not closed(r.objective):
                    heapq.heappush(heap, (-r.objective, next(seq), ch, r))
            if stats.nodes >= budget.node_limit or time.perf_counter() - start > budget.time_limit:
                exhausted = bool(heap)
                break
    finally:
        if pool:
            pool.shutdown()

    stats.wall_time = time.perf_counter() - start
    open_bound = max((-h[0] for h in heap), default=-math.inf)
    if best_x is None:
        stats.bound = open_bound
        return Solution("no_solution" if exhausted else "infeasible", stats=stats, log=lines)
    stats.bound = max(best, open_bound) if exhausted else best
    stats.gap = (stats.bound - best) / max(abs(best), 1e-9) if exhausted else 0.0
    lines.append(f"done status={'feasible' if exhausted else 'optimal'} objective={best:.6f} bound={stats.bound:.6f} "
                 f"nodes={stats.nodes} lps={stats.lp_solves}")
    return _make_solution(model, "feasible" if exhausted else "optimal", best_x, stats, lines)


def enumerate_oracle(model: MipModel, cap: int = 12, backend: Backend = "auto") -> Solution:
    """Exact optimum by solving the LP for every 0/1 indicator pattern."""
    cols = model.lambda_columns
    if len(cols) > cap:
        raise SolverError(f"{len(cols)} indicators exceed the enumeration cap of {cap}")
    start = time.perf_counter()
    stats = SolveStats()
    best, best_x = -math.inf, None
    for pattern in itertools.product((0, 1), repeat=len(cols)):
        res = solve_lp(model, dict(zip(cols, pattern)), backend=backend)
        stats.lp_solves += 1
        if res.status == "infeasible":
            continue
        if not res.ok:
            raise SolverError(f"LP for pattern {pattern} failed: {res.status} {res.message}")
        if res.objective > best + 1e-9:
            best, best_x = res.objective, res.x
    stats.wall_time = time.perf_counter() - start
    if best_x is None:
        return Solution("infeasible", stats=stats)
    x = polish(model, best_x)
    if x is None:
        x = best_x
    stats.bound = best
    stats.gap = 0.0
    return _make_solution(model, "optimal", x, stats, [])


def extract_timetable(solution: Solution, net: RailNetwork) -> Timetable:
    if solution.status not in ("optimal", "feasible") or not solution.events:
        raise SolverError(f"no timetable in a {solution.status} solution")
    arr, dep = {}, {}
    for t, i in net.events():
        arr[(t, i)] = max(0.0, solution.events[("a", t, i)])
        dep[(t, i)] = max(0.0, solution.events[("d", t, i)])
    return Timetable(arr, dep)


def pair_rows(solution: Solution, model: MipModel) -> list[tuple[SyncPair, float, int]]:
    return [(q, solution.sigma[q.key], solution.lam[q.key]) for q in model.pairs]
