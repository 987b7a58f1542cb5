"""LP relaxation of the model with some indicators fixed.

Two backends share one entry point: a bounded-variable primal simplex
written here (dense, meant for small and medium models) and HiGHS through
`scipy.optimize.linprog` for large ones.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional

import numpy as np
from scipy import optimize, sparse

from ..mip import MipModel

log = logging.getLogger(__name__)

LpStatus = Literal["optimal", "infeasible", "unbounded", "numerical"]
Backend = Literal["auto", "simplex", "highs"]

PRIMAL_TOL = 1e-7
# models up to this many rows go to the dense simplex under backend="auto"
AUTO_SIMPLEX_ROWS = 120


@dataclass
class LpResult:
    status: LpStatus
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _fixed_bounds(model: MipModel, fixed: Optional[Mapping[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    arr = model.arrays
    lo, hi = arr.lo.copy(), arr.hi.copy()
    for col, v in (fixed or {}).items():
        if v not in (0, 1):
            raise ValueError(f"indicator column {col} fixed to {v!r}; expected 0 or 1")
        if not model.variables[col].binary:
            raise ValueError(f"column {col} is not an indicator")
        lo[col] = hi[col] = float(v)
    return lo, hi


def solve_lp(
    model: MipModel,
    fixed: Optional[Mapping[int, int]] = None,
    backend: Backend = "auto",
) -> LpResult:
    """Maximize the model objective over the relaxation with ``fixed`` indicator columns substituted.

    ``fixed`` maps column index to 0 or 1.  An optimal result always has
    every row and bound satisfied to 1e-7; anything worse is reported as
    ``numerical``.
    """
    arr = model.arrays
    lo, hi = _fixed_bounds(model, fixed)
    if backend == "auto":
        backend = "simplex" if len(model.rows) <= AUTO_SIMPLEX_ROWS else "highs"
    if backend == "simplex":
        res = bounded_simplex(arr.c, arr.A.toarray(), arr.rlo, arr.rhi, lo, hi)
    elif backend == "highs":
        res = _highs(model, lo, hi)
    else:
        raise ValueError(f"unknown LP backend {backend!r}")
    if res.ok:
        worst = _violation(arr.A, res.x, arr.rlo, arr.rhi, lo, hi)
        if worst > PRIMAL_TOL:
            return LpResult("numerical", message=f"optimal point violates a row by {worst:.3g}")
        res.objective = float(arr.c @ res.x)
    return res


def _violation(A, x, rlo, rhi, lo, hi) -> float:
    ax = A @ x
    return max(
        float(np.max(rlo - ax, initial=0.0)),
        float(np.max(ax - rhi, initial=0.0)),
        float(np.max(lo - x, initial=0.0)),
        float(np.max(x - hi, initial=0.0)),
    )


# --------------------------------------------------------------------------
# HiGHS


@dataclass
class _HighsForm:
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: Optional[sparse.csr_matrix]
    b_eq: Optional[np.ndarray]


_forms: "dict[int, tuple[MipModel, _HighsForm]]" = {}


def _highs_form(model: MipModel) -> _HighsForm:
    hit = _forms.get(id(model))
    if hit is not None and hit[0] is model:
        return hit[1]
    arr = model.arrays
    eq = np.isfinite(arr.rlo) & (arr.rlo == arr.rhi)
    up = np.isfinite(arr.rhi) & ~eq
    dn = np.isfinite(arr.rlo) & ~eq
    A_ub = sparse.vstack([arr.A[up], -arr.A[dn]]).tocsr()
    b_ub = np.concatenate([arr.rhi[up], -arr.rlo[dn]])
    form = _HighsForm(
        A_ub, b_ub,
        arr.A[eq].tocsr() if eq.any() else None,
        arr.rhi[eq] if eq.any() else None,
    )
    if len(_forms) > 32:
        _forms.clear()
    _forms[id(model)] = (model, form)
    return form


def _highs(model: MipModel, lo: np.ndarray, hi: np.ndarray) -> LpResult:
    form = _highs_form(model)
    bounds = np.column_stack([np.where(np.isfinite(lo), lo, -np.inf), np.where(np.isfinite(hi), hi, np.inf)])
    if form.A_ub.shape[0] == 0 and form.A_eq is None:
        A_ub, b_ub = None, None
    else:
        A_ub, b_ub = form.A_ub, form.b_ub
    res = optimize.linprog(
        -model.arrays.c, A_ub=A_ub, b_ub=b_ub, A_eq=form.A_eq, b_eq=form.b_eq,
        bounds=bounds, method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 0:
        return LpResult("optimal", x=np.asarray(res.x, dtype=float), iterations=int(getattr(res, "nit", 0) or 0))
    if res.status == 2:
        return LpResult("infeasible", message=res.message)
    if res.status == 3:
        return LpResult("unbounded", message=res.message)
    return LpResult("numerical", message=res.message)


# --------------------------------------------------------------------------
# bounded-variable primal simplex

_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3


@dataclass
class _Tableau:
    """Revised-simplex state over columns [A | -I | artificials] with equality rows ``= 0``."""

    M: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    x: np.ndarray
    head: np.ndarray
    status: np.ndarray
    Binv: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.refactor()

    def refactor(self) -> None:
        B = self.M[:, self.head]
        self.Binv = np.linalg.inv(B)
        nonbasic = np.ones(self.M.shape[1], dtype=bool)
        nonbasic[self.head] = False
        self.x[self.head] = -self.Binv @ (self.M[:, nonbasic] @ self.x[nonbasic])


def bounded_simplex(
    c: np.ndarray,
    A: np.ndarray,
    rlo: np.ndarray,
    rhi: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: int = 50_000,
    bland_after: int = 50,
) -> LpResult:
    """Maximize ``c x`` subject to ``rlo <= A x <= rhi`` and ``lo <= x <= hi``.

    Entering columns are priced by largest reduced cost until ``bland_after``
    consecutive degenerate pivots, after which the smallest eligible index
    enters and the smallest basic index leaves on ratio ties (Bland's rule),
    which rules out cycling.
    """
    m, n = A.shape
    if np.any(lo > hi + PRIMAL_TOL) or np.any(rlo > rhi + PRIMAL_TOL):
        return LpResult("infeasible", message="inverted bounds")
    if m == 0:
        x = np.where(c > 0, hi, np.where(c < 0, lo, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))))
        if not np.all(np.isfinite(x)):
            return LpResult("unbounded")
        return LpResult("optimal", float(c @ x), x=x.astype(float))

    x0 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    status0 = np.where(np.isfinite(lo), _AT_LO, np.where(np.isfinite(hi), _AT_HI, _FREE))
    act = A @ x0
    # rows whose activity starts outside [rlo, rhi] get an artificial basic column
    below = act < rlo - PRIMAL_TOL
    above = act > rhi + PRIMAL_TOL
    bad = np.flatnonzero(below | above)
    k = len(bad)

    M = np.zeros((m, n + m + k))
    M[:, :n] = A
    M[:, n:n + m] = -np.eye(m)
    art_sign = np.where(below[bad], 1.0, -1.0)
    for col, (row, sgn) in enumerate(zip(bad, art_sign)):
        M[row, n + m + col] = sgn
    all_lo = np.concatenate([lo, rlo, np.zeros(k)])
    all_hi = np.concatenate([hi, rhi, np.full(k, np.inf)])
    x = np.concatenate([x0, act, np.zeros(k)])
    status = np.concatenate([status0, np.full(m + k, _BASIC)])
    head = np.arange(n, n + m)
    for col, row in enumerate(bad):
        # the slack of a violated row sits at the violated bound; the artificial absorbs the gap
        s = n + row
        if below[row]:
            x[s], status[s] = rlo[row], _AT_LO
        else:
            x[s], status[s] = rhi[row], _AT_HI
        head[row] = n + m + col
    tab = _Tableau(M, all_lo, all_hi, x, head, status)
    tab.status[tab.head] = _BASIC

    iters = 0
    if k:
        cost1 = np.zeros(n + m + k)
        cost1[n + m:] = -1.0  # maximize minus the sum of artificials
        st, it = _iterate(tab, cost1, max_iter, bland_after)
        iters += it
        if st != "optimal":
            return LpResult("numerical", iterations=iters, message=f"phase 1 ended {st}")
        if np.sum(tab.x[n + m:]) > PRIMAL_TOL:
            return LpResult("infeasible", iterations=iters)
        tab.hi[n + m:] = 0.0
        tab.x[n + m:] = np.clip(tab.x[n + m:], 0.0, 0.0)
        for col in range(n + m, n + m + k):
            if tab.status[col] != _BASIC:
                tab.status[col] = _AT_LO
        tab.refactor()

    cost2 = np.concatenate([c, np.zeros(m + k)])
    st, it = _iterate(tab, cost2, max_iter - iters, bland_after)
    iters += it
    if st != "optimal":
        return LpResult(st, iterations=iters)
    tab.refactor()
    x = tab.x[:n].copy()
    return LpResult("optimal", float(c @ x), x=x, iterations=iters)


def _iterate(tab: _Tableau, cost: np.ndarray, max_iter: int, bland_after: int) -> tuple[str, int]:
    piv_tol, dual_tol = 1e-9, 1e-9
    M, lo, hi, x, status = tab.M, tab.lo, tab.hi, tab.x, tab.status
    degenerate = 0
    for it in range(max_iter):
        if it and it % 100 == 0:
            tab.refactor()
        y = cost[tab.head] @ tab.Binv
        d = cost - y @ M
        can_up = ((status == _AT_LO) | (status == _FREE)) & (d > dual_tol) & (hi - x > piv_tol)
        can_dn = ((status == _AT_HI) | (status == _FREE)) & (d < -dual_tol) & (x - lo > piv_tol)
        eligible = np.flatnonzero(can_up | can_dn)
        if len(eligible) == 0:
            return "optimal", it
        bland = degenerate >= bland_after
        j = int(eligible[0]) if bland else int(eligible[np.argmax(np.abs(d[eligible]))])
        direction = 1.0 if can_up[j] else -1.0

        w = tab.Binv @ M[:, j]
        delta = -direction * w  # change of basic values per unit step
        xb, lb, ub = x[tab.head], lo[tab.head], hi[tab.head]
        ratios = np.full(len(w), np.inf)
        dec = delta < -piv_tol
        inc = delta > piv_tol
        ratios[dec] = (xb[dec] - lb[dec]) / -delta[dec]
        ratios[inc] = (ub[inc] - xb[inc]) / delta[inc]
        ratios = np.maximum(ratios, 0.0)
        theta_flip = hi[j] - lo[j]
        theta_basic = float(np.min(ratios)) if len(ratios) else np.inf
        if not math.isfinite(theta_basic) and not math.isfinite(theta_flip):
            return "unbounded", it

        if theta_flip <= theta_basic:
            x[j] = hi[j] if direction > 0 else lo[j]
            x[tab.head] = xb + theta_flip * delta
            status[j] = _AT_HI if direction > 0 else _AT_LO
            degenerate = 0 if theta_flip > piv_tol else degenerate + 1
            continue

        ties = np.flatnonzero(ratios <= theta_basic + 1e-12)
        if bland:
            r = int(ties[np.argmin(tab.head[ties])])
        else:
            r = int(ties[np.argmax(np.abs(delta[ties]))])
        theta = ratios[r]
        leaving = tab.head[r]
        x[tab.head] = xb + theta * delta
        x[j] += direction * theta
        x[leaving] = lo[leaving] if delta[r] < 0 else hi[leaving]
        status[leaving] = _AT_LO if delta[r] < 0 else _AT_HI
        if not math.isfinite(x[leaving]):
            status[leaving] = _FREE
            x[leaving] = 0.0
        status[j] = _BASIC
        tab.head[r] = j
        # product-form update of the basis inverse
        piv = w[r]
        row_r = tab.Binv[r] / piv
        tab.Binv -= np.outer(w, row_r)
        tab.Binv[r] = row_r
        degenerate = degenerate + 1 if theta <= piv_tol else 0
    return "numerical", max_iter
