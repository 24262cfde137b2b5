"""Dense primal simplex for linear programs with variable bounds.

Minimizes ``c @ x`` subject to row constraints (``<=``, ``>=``, ``=``) and
elementwise bounds, any of which may be infinite. Nonbasic variables rest on
a finite bound; fully free variables may rest at a caller-supplied starting
value, which lets callers that know a feasible corner skip phase one
entirely (the epigraph-style master problems exploit this).

The implementation is a two-phase bounded-variable tableau method. Artificial
columns are added only for rows whose slack start value falls outside its
bounds; phase one minimizes their sum. Dantzig pricing with index tie-breaks
is used until a run of degenerate steps trips Bland's rule, which guarantees
termination. The reported solution is re-solved from the final basis against
the original data, so accumulated tableau drift does not reach the caller.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

LE = "<="
GE = ">="
EQ = "="

_NB_LOWER = 0
_NB_UPPER = 1
_NB_FREE = 2
_BASIC = 3

DEFAULT_PIVOT_TOL = 1e-11
DEFAULT_RATIO_TOL = 1e-9
DEFAULT_OPT_TOL = 1e-9
DEFAULT_FEAS_TOL = 1e-7
DEFAULT_BLAND_AFTER = 40


class SimplexStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL = "numerical"


@dataclass(frozen=True)
class DenseLP:
    """min c @ x  s.t.  rows x (senses) rhs,  lower <= x <= upper."""

    c: np.ndarray
    rows: np.ndarray
    senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    free_start: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        rows = np.asarray(self.rows, dtype=float).reshape(-1, c.shape[0])
        rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        senses = tuple(self.senses)
        for name, arr in (("c", c), ("rows", rows), ("rhs", rhs)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"LP {name} must be finite")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise InputError("LP bounds may be infinite but not NaN")
        if rows.shape != (rhs.shape[0], c.shape[0]):
            raise InputError("LP dimensions are inconsistent")
        if lower.shape != c.shape or upper.shape != c.shape:
            raise InputError("LP bounds must have one entry per variable")
        if np.any(lower > upper):
            raise InputError("LP has crossing bounds")
        if any(s not in (LE, GE, EQ) for s in senses) or len(senses) != rhs.shape[0]:
            raise InputError("LP senses must be one of <=, >=, = per row")
        for j, v in dict(self.free_start).items():
            if not (0 <= j < c.shape[0]) or np.isfinite(lower[j]) or np.isfinite(upper[j]):
                raise InputError("free_start entries must reference fully free variables")
            if not np.isfinite(v):
                raise InputError("free_start values must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "free_start", dict(self.free_start))

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rhs.shape[0]


@dataclass(frozen=True)
class SimplexResult:
    status: SimplexStatus
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None
    basis: tuple[int, ...]
    iterations: int
    message: str = ""


def _solve_boxed(lp: DenseLP) -> SimplexResult:
    """Row-free LP: pick the best finite bound per variable."""
    x = np.zeros(lp.n_vars)
    for j in range(lp.n_vars):
        if lp.c[j] > 0.0:
            if not np.isfinite(lp.lower[j]):
                return SimplexResult(SimplexStatus.UNBOUNDED, None, -np.inf, None, (),
                                     0, f"variable {j} unbounded below")
            x[j] = lp.lower[j]
        elif lp.c[j] < 0.0:
            if not np.isfinite(lp.upper[j]):
                return SimplexResult(SimplexStatus.UNBOUNDED, None, -np.inf, None, (),
                                     0, f"variable {j} unbounded above")
            x[j] = lp.upper[j]
        elif np.isfinite(lp.lower[j]):
            x[j] = lp.lower[j]
        elif np.isfinite(lp.upper[j]):
            x[j] = lp.upper[j]
        else:
            x[j] = lp.free_start.get(j, 0.0)
    return SimplexResult(SimplexStatus.OPTIMAL, x, float(lp.c @ x),
                         np.zeros(0), (), 0)


class _Tableau:
    """Mutable simplex state over the extended column set (vars, slacks, artificials)."""

    def __init__(self, lp: DenseLP, ratio_tol, pivot_tol, opt_tol, bland_after):
        self.lp = lp
        self.ratio_tol = ratio_tol
        self.pivot_tol = pivot_tol
        self.opt_tol = opt_tol
        self.bland_after = bland_after
        self.iterations = 0
        m, n = lp.n_rows, lp.n_vars

        sigma = np.array([-1.0 if s == GE else 1.0 for s in lp.senses])
        lower = np.concatenate([lp.lower, np.zeros(m)])
        upper = np.concatenate([lp.upper,
                                np.array([0.0 if s == EQ else np.inf for s in lp.senses])])
        xval = np.zeros(n + m)
        status = np.full(n + m, _NB_LOWER, dtype=np.int8)
        for j in range(n):
            if np.isfinite(lp.lower[j]):
                xval[j] = lp.lower[j]
                status[j] = _NB_LOWER
            elif np.isfinite(lp.upper[j]):
                xval[j] = lp.upper[j]
                status[j] = _NB_UPPER
            else:
                xval[j] = lp.free_start.get(j, 0.0)
                status[j] = _NB_FREE

        residual = lp.rhs - lp.rows @ xval[:n]
        slack_val = sigma * residual
        infeasible = np.zeros(m, dtype=bool)
        for i in range(m):
            lo, hi = lower[n + i], upper[n + i]
            if not (lo <= slack_val[i] <= hi):
                infeasible[i] = True
        n_art = int(infeasible.sum())
        total = n + m + n_art

        a_full = np.zeros((m, total))
        a_full[:, :n] = lp.rows
        a_full[np.arange(m), n + np.arange(m)] = sigma
        art_cols = []
        k = n + m
        tau = np.zeros(m)
        for i in np.flatnonzero(infeasible):
            tau[i] = 1.0 if residual[i] >= 0.0 else -1.0
            a_full[i, k] = tau[i]
            art_cols.append(k)
            k += 1

        lower = np.concatenate([lower, np.zeros(n_art)])
        upper = np.concatenate([upper, np.full(n_art, np.inf)])
        xval = np.concatenate([xval, np.zeros(n_art)])
        status = np.concatenate([status, np.full(n_art, _NB_LOWER, dtype=np.int8)])

        basis = np.empty(m, dtype=np.int64)
        beta = np.empty(m)
        diag = np.empty(m)
        art_iter = iter(art_cols)
        for i in range(m):
            if infeasible[i]:
                basis[i] = next(art_iter)
                beta[i] = abs(residual[i])
                diag[i] = tau[i]
            else:
                basis[i] = n + i
                beta[i] = slack_val[i]
                diag[i] = sigma[i]
        status[basis] = _BASIC

        self.n = n
        self.m = m
        self.total = total
        self.a_full = a_full
        self.t = diag[:, None] * a_full
        self.beta = beta
        self.basis = basis
        self.xval = xval
        self.status = status
        self.lower = lower
        self.upper = upper
        self.basis_lower = lower[basis].copy()
        self.basis_upper = upper[basis].copy()
        self.art_cols = np.array(art_cols, dtype=np.int64)
        self.allowed = np.ones(total, dtype=bool)
        # Columns pinned by equal bounds can never move.
        self.allowed[np.flatnonzero(upper - lower <= 0.0)] = False

    # -- pivoting -----------------------------------------------------------

    def _entering(self, zrow, dual_tol, bland):
        can_inc = (((self.status == _NB_LOWER) | (self.status == _NB_FREE))
                   & self.allowed & (zrow < -dual_tol))
        can_dec = (((self.status == _NB_UPPER) | (self.status == _NB_FREE))
                   & self.allowed & (zrow > dual_tol))
        any_inc = can_inc.any()
        if not any_inc and not can_dec.any():
            return None, 0
        if bland:
            cands = np.flatnonzero(can_inc | can_dec)
            q = int(cands[0])
        else:
            score = np.where(can_inc | can_dec, np.abs(zrow), -np.inf)
            q = int(np.argmax(score))
        return q, (1 if can_inc[q] else -1)

    def run_phase(self, cost, max_iterations):
        """Pivot until optimal for ``cost``; returns a SimplexStatus."""
        zrow = cost - cost[self.basis] @ self.t
        dual_tol = self.opt_tol * (1.0 + float(np.abs(cost).max(initial=0.0)))
        degenerate_streak = 0
        while True:
            if self.iterations >= max_iterations:
                return SimplexStatus.ITERATION_LIMIT
            bland = degenerate_streak >= self.bland_after
            q, direction = self._entering(zrow, dual_tol, bland)
            if q is None:
                return SimplexStatus.OPTIMAL
            col = self.t[:, q]
            w = direction * col
            lims = np.full(self.m, np.inf)
            pos = w > self.ratio_tol
            if pos.any():
                lims[pos] = (self.beta[pos] - self.basis_lower[pos]) / w[pos]
            neg = w < -self.ratio_tol
            if neg.any():
                lims[neg] = (self.beta[neg] - self.basis_upper[neg]) / w[neg]
            np.maximum(lims, 0.0, out=lims)
            rmin = float(lims.min(initial=np.inf))
            span = self.upper[q] - self.lower[q]
            t_self = span if np.isfinite(span) else np.inf
            step = min(rmin, t_self)
            if not np.isfinite(step):
                return SimplexStatus.UNBOUNDED
            self.iterations += 1
            degenerate_streak = degenerate_streak + 1 if step < 1e-10 else 0
            if t_self <= rmin:
                # Bound flip: variable crosses its box without a basis change.
                self.beta -= direction * t_self * col
                self.xval[q] = self.upper[q] if direction > 0 else self.lower[q]
                self.status[q] = _NB_UPPER if direction > 0 else _NB_LOWER
                continue
            tie = lims <= rmin + self.ratio_tol * (1.0 + abs(rmin))
            rows = np.flatnonzero(tie)
            if bland:
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                strength = np.abs(col[rows])
                best = strength.max()
                close = rows[strength >= best - 1e-12 * (1.0 + best)]
                r = int(close[np.argmin(self.basis[close])])
            piv = col[r]
            if abs(piv) < self.pivot_tol:
                return SimplexStatus.NUMERICAL
            entering_value = self.xval[q] + direction * step
            leaving = int(self.basis[r])
            self.beta -= direction * step * col
            if w[r] > 0.0:
                self.status[leaving] = _NB_LOWER
                self.xval[leaving] = self.basis_lower[r]
            else:
                self.status[leaving] = _NB_UPPER
                self.xval[leaving] = self.basis_upper[r]
            if leaving >= self.n + self.m:
                self.allowed[leaving] = False
            colq = self.t[:, q].copy()
            pivrow = self.t[r, :] / piv
            self.t -= np.outer(colq, pivrow)
            self.t[r, :] = pivrow
            self.t[:, q] = 0.0
            self.t[r, q] = 1.0
            zq = zrow[q]
            zrow = zrow - zq * pivrow
            zrow[q] = 0.0
            self.basis[r] = q
            self.status[q] = _BASIC
            self.beta[r] = entering_value
            self.basis_lower[r] = self.lower[q]
            self.basis_upper[r] = self.upper[q]

    # -- extraction ---------------------------------------------------------

    def full_values(self) -> np.ndarray:
        x = self.xval.copy()
        x[self.basis] = self.beta
        return x

    def refine(self, cost):
        """Re-solve basic values and duals from the original data."""
        x = self.full_values()
        bmat = self.a_full[:, self.basis]
        nb_mask = np.ones(self.total, dtype=bool)
        nb_mask[self.basis] = False
        rhs_eff = self.lp.rhs - self.a_full[:, nb_mask] @ x[nb_mask]
        duals = None
        try:
            x[self.basis] = np.linalg.solve(bmat, rhs_eff)
            duals = np.linalg.solve(bmat.T, cost[self.basis])
        except np.linalg.LinAlgError:
            pass
        return x, duals


def solve(lp: DenseLP, max_iterations: int | None = None,
          bland_after: int = DEFAULT_BLAND_AFTER,
          pivot_tol: float = DEFAULT_PIVOT_TOL,
          ratio_tol: float = DEFAULT_RATIO_TOL,
          opt_tol: float = DEFAULT_OPT_TOL,
          feas_tol: float = DEFAULT_FEAS_TOL) -> SimplexResult:
    """Solve the LP; deterministic for identical input."""
    if lp.n_rows == 0:
        return _solve_boxed(lp)
    tab = _Tableau(lp, ratio_tol, pivot_tol, opt_tol, bland_after)
    if max_iterations is None:
        max_iterations = max(500, 30 * (tab.m + tab.total))

    cost2 = np.zeros(tab.total)
    cost2[:tab.n] = lp.c

    if tab.art_cols.size:
        cost1 = np.zeros(tab.total)
        cost1[tab.art_cols] = 1.0
        status = tab.run_phase(cost1, max_iterations)
        if status != SimplexStatus.OPTIMAL:
            label = "phase one " + status.value
            return SimplexResult(status, None, np.nan, None, tuple(tab.basis),
                                 tab.iterations, label)
        infeasibility = float(cost1[tab.basis] @ tab.beta)
        if infeasibility > feas_tol * (1.0 + float(np.abs(lp.rhs).max(initial=0.0))):
            return SimplexResult(SimplexStatus.INFEASIBLE, None, np.nan, None,
                                 tuple(tab.basis), tab.iterations,
                                 f"phase one left infeasibility {infeasibility:.3e}")
        # Artificials are frozen at zero for phase two.
        tab.allowed[tab.art_cols] = False
        art_basic = np.isin(tab.basis, tab.art_cols)
        tab.basis_upper[art_basic] = 0.0
        tab.upper[tab.art_cols] = 0.0

    status = tab.run_phase(cost2, max_iterations)
    if status in (SimplexStatus.UNBOUNDED, SimplexStatus.NUMERICAL):
        return SimplexResult(status, None, -np.inf if status is SimplexStatus.UNBOUNDED
                             else np.nan, None, tuple(tab.basis), tab.iterations,
                             "phase two " + status.value)
    x_full, duals = tab.refine(cost2)
    x = x_full[:lp.n_vars]
    objective = float(lp.c @ x)
    message = "" if status is SimplexStatus.OPTIMAL else "stopped at iteration limit"
    return SimplexResult(status, x, objective, duals, tuple(tab.basis),
                         tab.iterations, message)
