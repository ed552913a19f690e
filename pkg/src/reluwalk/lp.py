"""Dense LP solver for small region-restricted problems.

Solves  maximize c.x  subject to halfspace constraints and a finite box,
with a two-phase bounded-variable simplex. Box bounds are handled implicitly
(variables carry their own bounds, no constraint rows are added for them),
which keeps the tableau at one row per halfspace.

Phase 1 drives artificial variables to zero to find a feasible basis; phase 2
optimizes the true objective. The entering rule is largest reduced cost with
a permanent switch to Bland's smallest-index rule after a fixed pivot count,
which prevents cycling on degenerate instances. Nonbasic variables sitting at
their upper bound are represented by complementing the column (x replaced by
ub - x), so the working tableau always has nonbasic values at zero.

All tolerances used by the solver live in FEASIBILITY_TOL and PIVOT_TOL.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .network import Box

__all__ = [
    "FEASIBILITY_TOL",
    "PIVOT_TOL",
    "Halfspace",
    "LinearProgram",
    "LpStatus",
    "LpOutcome",
    "LpSolverFailure",
    "solve_lp",
]

FEASIBILITY_TOL = 1e-7
PIVOT_TOL = 1e-9

# Pivots taken with the largest-coefficient rule before switching to Bland.
_BLAND_SWITCH = 500


class LpSolverFailure(RuntimeError):
    """Numerical breakdown (pivot tolerance breached or iteration runaway).

    Deliberately distinct from an Infeasible outcome.
    """


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Halfspace:
    """Constraint a.x + b >= 0 (sense "ge") or a.x + b <= 0 (sense "le")."""

    a: np.ndarray
    b: float
    sense: str

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "b", float(self.b))
        if self.sense not in ("ge", "le"):
            raise ValueError(f"sense must be 'ge' or 'le', got {self.sense!r}")

    def value(self, x):
        return float(self.a @ x + self.b)

    def satisfied(self, x, tol=FEASIBILITY_TOL):
        v = self.value(x)
        return v >= -tol if self.sense == "ge" else v <= tol


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective.x over all halfspaces intersected with the box."""

    objective: np.ndarray
    halfspaces: tuple
    box: Box

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))
        n = self.box.dim
        if obj.size != n:
            raise ValueError(f"objective has length {obj.size}, expected {n}")
        for i, hs in enumerate(self.halfspaces):
            if hs.a.size != n:
                raise ValueError(f"halfspace {i} has dimension {hs.a.size}, expected {n}")


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    point: np.ndarray | None = None
    value: float | None = None


class _Tableau:
    """Working state of the bounded-variable simplex."""

    def __init__(self, A, rhs, ub, basis):
        self.A = A              # (m, ntot) rows with basic columns forming identity
        self.rhs = rhs          # (m,) current basic values, kept >= 0
        self.ub = ub            # (ntot,) upper bound of each variable (inf allowed)
        self.basis = basis      # (m,) variable index basic in each row
        ntot = A.shape[1]
        self.flipped = np.zeros(ntot, dtype=bool)
        self.is_basic = np.zeros(ntot, dtype=bool)
        self.is_basic[basis] = True
        self.pivots = 0

    @property
    def m(self):
        return self.A.shape[0]

    def flip(self, j, d):
        """Complement variable j (x -> ub - x); requires finite ub[j]."""
        bound = self.ub[j]
        self.rhs -= self.A[:, j] * bound
        self.A[:, j] = -self.A[:, j]
        d[j] = -d[j]
        self.flipped[j] = ~self.flipped[j]

    def pivot(self, row, col, d):
        piv = self.A[row, col]
        if abs(piv) < PIVOT_TOL:
            raise LpSolverFailure(f"pivot {piv:.3e} below tolerance")
        self.A[row] /= piv
        self.rhs[row] /= piv
        factors = self.A[:, col].copy()
        factors[row] = 0.0
        self.A -= np.outer(factors, self.A[row])
        self.rhs -= factors * self.rhs[row]
        f = d[col]
        if f != 0.0:
            d -= f * self.A[row]
        leaving = self.basis[row]
        self.is_basic[leaving] = False
        self.is_basic[col] = True
        self.basis[row] = col
        # scrub tiny negative residues so later ratio tests stay clean
        np.maximum(self.rhs, 0.0, out=self.rhs)
        self.pivots += 1


def _choose_entering(tab, d, allowed):
    eligible = allowed & ~tab.is_basic & (tab.ub > 0) & (d > PIVOT_TOL)
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        return None
    if tab.pivots < _BLAND_SWITCH:
        return int(idx[np.argmax(d[idx])])
    return int(idx[0])


def _ratio_candidates(tab, col_vals, j):
    """All (ratio, variable, kind, row) tuples limiting an increase of x_j."""
    cands = []
    basic_ub = tab.ub[tab.basis]
    pos = col_vals > PIVOT_TOL
    for i in np.flatnonzero(pos):
        cands.append((max(tab.rhs[i] / col_vals[i], 0.0), tab.basis[i], "lower", i))
    neg = (col_vals < -PIVOT_TOL) & np.isfinite(basic_ub)
    for i in np.flatnonzero(neg):
        cands.append((max((tab.rhs[i] - basic_ub[i]) / col_vals[i], 0.0), tab.basis[i], "upper", i))
    if np.isfinite(tab.ub[j]):
        cands.append((tab.ub[j], j, "flip", -1))
    return cands


def _optimize(tab, d, allowed, max_pivots):
    """Run simplex pivots until no favorable column remains."""
    while True:
        if tab.pivots > max_pivots:
            raise LpSolverFailure(f"no convergence within {max_pivots} pivots")
        j = _choose_entering(tab, d, allowed)
        if j is None:
            return
        col_vals = tab.A[:, j]
        cands = _ratio_candidates(tab, col_vals, j)
        if not cands:
            raise LpSolverFailure("unbounded direction in a box-bounded program")
        t = min(c[0] for c in cands)
        near = [c for c in cands if c[0] <= t + 1e-12]
        if tab.pivots < _BLAND_SWITCH:
            # prefer a bound flip, else the largest pivot magnitude
            flips = [c for c in near if c[2] == "flip"]
            if flips:
                chosen = flips[0]
            else:
                chosen = max(near, key=lambda c: abs(col_vals[c[3]]))
        else:
            chosen = min(near, key=lambda c: c[1])  # Bland: smallest variable index
        _, var, kind, row = chosen
        if kind == "flip":
            tab.flip(j, d)
            tab.pivots += 1
            continue
        if kind == "upper":
            tab.flip(var, d)        # basic column is a unit vector, so this only
            tab.A[row] *= -1.0      # touches row `row`; re-normalize its sign
            tab.rhs[row] *= -1.0
            np.maximum(tab.rhs, 0.0, out=tab.rhs)
        tab.pivot(row, j, d)


def solve_lp(lp, max_pivots=None):
    """Solve the program; returns an optimal point or an Infeasible outcome.

    Deterministic for a fixed input. Raises LpSolverFailure on numerical
    breakdown, never silently returning an invalid point.
    """
    n = lp.box.dim
    lower, upper = lp.box.lower, lp.box.upper
    width = upper - lower

    # normalize every halfspace to row.x <= rhs form, then shift x = lower + y
    m = len(lp.halfspaces)
    G = np.zeros((m, n))
    h = np.zeros(m)
    for i, hs in enumerate(lp.halfspaces):
        if hs.sense == "ge":
            G[i] = -hs.a
            h[i] = hs.b
        else:
            G[i] = hs.a
            h[i] = -hs.b
    h = h - G @ lower

    neg_rows = np.flatnonzero(h < 0)
    n_art = neg_rows.size
    ntot = n + m + n_art
    A = np.zeros((m, ntot))
    rhs = np.zeros(m)
    ub = np.concatenate([width, np.full(m + n_art, np.inf)])
    basis = np.zeros(m, dtype=int)
    art_of_row = {int(r): n + m + k for k, r in enumerate(neg_rows)}
    for i in range(m):
        if h[i] >= 0:
            A[i, :n] = G[i]
            A[i, n + i] = 1.0
            rhs[i] = h[i]
            basis[i] = n + i
        else:
            A[i, :n] = -G[i]
            A[i, n + i] = -1.0
            art = art_of_row[i]
            A[i, art] = 1.0
            rhs[i] = -h[i]
            basis[i] = art
    tab = _Tableau(A, rhs, ub, basis)
    if max_pivots is None:
        max_pivots = 1000 + 50 * (m + n)

    art_slice = slice(n + m, ntot)
    allowed = np.ones(ntot, dtype=bool)

    if n_art:
        # phase 1: maximize minus the sum of artificials
        d = np.zeros(ntot)
        d[art_slice] = -1.0
        for i in range(m):
            if d[basis[i]] != 0.0:
                d -= d[basis[i]] * A[i]
        _optimize(tab, d, allowed, max_pivots)
        art_idx = np.arange(n + m, ntot)
        art_values = np.zeros(n_art)
        for i in range(tab.m):
            if tab.basis[i] >= n + m:
                art_values[tab.basis[i] - (n + m)] = tab.rhs[i]
        if art_values.sum() > FEASIBILITY_TOL:
            return LpOutcome(LpStatus.INFEASIBLE)
        # pin every artificial at zero; basic ones keep a zero value
        tab.ub[art_idx] = 0.0
        for i in range(tab.m):
            if tab.basis[i] >= n + m:
                tab.rhs[i] = 0.0
        allowed[art_slice] = False

    # phase 2 objective in the working coordinates (flips negate coefficients)
    d = np.zeros(ntot)
    d[:n] = np.where(tab.flipped[:n], -lp.objective, lp.objective)
    for i in range(tab.m):
        if d[tab.basis[i]] != 0.0:
            d -= d[tab.basis[i]] * tab.A[i]
    _optimize(tab, d, allowed, max_pivots)

    values = np.zeros(ntot)
    values[tab.basis] = tab.rhs
    finite_flip = tab.flipped & np.isfinite(tab.ub)
    values[finite_flip] = tab.ub[finite_flip] - values[finite_flip]
    x = np.clip(lower + values[:n], lower, upper)

    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    for hs in lp.halfspaces:
        v = hs.value(x)
        violation = -v if hs.sense == "ge" else v
        if violation > FEASIBILITY_TOL * max(1.0, float(np.linalg.norm(hs.a)) * scale):
            raise LpSolverFailure("optimal basis yields an infeasible point")
    return LpOutcome(LpStatus.OPTIMAL, x, float(lp.objective @ x))
