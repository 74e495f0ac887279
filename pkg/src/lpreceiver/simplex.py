"""Two-phase primal simplex on a dense tableau.

Pivoting uses Dantzig's rule and falls back to Bland's rule after a window
of consecutive degenerate pivots, which guarantees termination.  The tableau
is rebuilt from the original data every ``refactor_every`` pivots to keep
round-off from accumulating.  Results are deterministic for a given input.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import IterationLimitError
from .lp import LinearProgram


@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    pivot_tol: float = 1e-9
    max_iters: int = 50_000
    pivot_rule: str = "dantzig"  # or "bland"
    stall_window: int = 50
    refactor_every: int = 200


DEFAULT_OPTIONS = SolveOptions()


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of :func:`solve`.

    ``primal`` is in the carrier's column space and ``objective_value`` in the
    carrier's own sense.  ``basis`` lists standard-form column indices (the
    carrier columns come first, then one slack per inequality/bound row).
    ``duals`` belong to the minimization form (objective negated when the
    carrier maximizes) and are ordered: equality rows, inequality rows, then
    one row per finite upper bound.
    """

    status: str
    objective_value: float
    primal: np.ndarray
    basis: tuple
    iterations: int
    duals: np.ndarray | None = None
    phase1_iterations: int = 0
    optimum_unique: str = "unknown"


class _StandardForm:
    """min c z  s.t.  A z = b, z >= 0, derived from a carrier LP."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_columns
        lo, hi = lp.lower, lp.upper
        cols = []          # (orig column, sign) per structural z column
        offset = np.zeros(n)
        bound_rows = []    # (z column, rhs)
        for k in range(n):
            if np.isfinite(lo[k]):
                offset[k] = lo[k]
                cols.append((k, 1.0))
                if np.isfinite(hi[k]):
                    bound_rows.append((len(cols) - 1, hi[k] - lo[k]))
            elif np.isfinite(hi[k]):
                offset[k] = hi[k]
                cols.append((k, -1.0))
            else:
                cols.append((k, 1.0))
                cols.append((k, -1.0))
        nz = len(cols)
        M = np.zeros((n, nz))
        for z, (k, s) in enumerate(cols):
            M[k, z] = s
        A_eq = lp.A_eq.toarray() @ M
        A_ub = lp.A_ub.toarray() @ M
        b_eq = lp.b_eq - lp.A_eq @ offset
        b_ub = lp.b_ub - lp.A_ub @ offset
        m_eq, m_ub, m_bd = A_eq.shape[0], A_ub.shape[0], len(bound_rows)
        m = m_eq + m_ub + m_bd
        n_slack = m_ub + m_bd
        A = np.zeros((m, nz + n_slack))
        A[:m_eq, :nz] = A_eq
        A[m_eq:m_eq + m_ub, :nz] = A_ub
        for r, (z, rhs) in enumerate(bound_rows):
            A[m_eq + m_ub + r, z] = 1.0
        A[m_eq:, nz:] = np.eye(n_slack)
        b = np.concatenate([b_eq, b_ub, [rhs for _, rhs in bound_rows]])
        self.A, self.b = A, b
        self.M, self.offset = M, offset
        self.nz, self.n_slack, self.m_eq = nz, n_slack, m_eq

    def cost(self, lp: LinearProgram) -> tuple[np.ndarray, float]:
        """Minimization cost over z and its constant term."""
        c_min = -lp.objective if lp.sense == "max" else lp.objective
        return np.concatenate([self.M.T @ c_min, np.zeros(self.n_slack)]), float(c_min @ self.offset)

    def to_carrier(self, z: np.ndarray) -> np.ndarray:
        return self.offset + self.M @ z[: self.nz]


@njit(cache=True)
def _pivot_loop(T, rhs, d, basis, allowed, opt_tol, piv_tol, feas_tol,
                bland_always, stall_window, budget, degenerate):
    """Pivot until optimal, unbounded or ``budget`` pivots are spent.

    Entering: most negative reduced cost (lowest index on ties), or the lowest
    eligible index once Bland's rule is active.  Leaving: minimum ratio, ties
    to the lowest basic-variable index.  Returns (code, pivots, degenerate)
    with code 0 optimal, 1 unbounded, 2 budget exhausted.
    """
    m, n = T.shape
    pivots = 0
    while True:
        bland = bland_always or degenerate >= stall_window
        j = -1
        best = -opt_tol
        for k in range(n):
            if allowed[k] and d[k] < -opt_tol:
                if bland:
                    j = k
                    break
                if d[k] < best:
                    best = d[k]
                    j = k
        if j < 0:
            return 0, pivots, degenerate
        r = -1
        ratio = 0.0
        for i in range(m):
            a = T[i, j]
            if a > piv_tol:
                t = max(rhs[i], 0.0) / a
                if r < 0 or t < ratio - 1e-12 * (1.0 + abs(ratio)):
                    r, ratio = i, t
                elif t <= ratio + 1e-12 * (1.0 + abs(ratio)) and basis[i] < basis[r]:
                    r = i
                    ratio = min(ratio, t)
        if r < 0:
            return 1, pivots, degenerate
        if pivots >= budget:
            return 2, pivots, degenerate
        inv = 1.0 / T[r, j]
        for k in range(n):
            T[r, k] *= inv
        rhs[r] *= inv
        for i in range(m):
            if i != r:
                f = T[i, j]
                if f != 0.0:
                    for k in range(n):
                        v = T[i, k] - f * T[r, k]
                        T[i, k] = 0.0 if abs(v) < 1e-13 else v
                    v = rhs[i] - f * rhs[r]
                    rhs[i] = 0.0 if abs(v) < 1e-13 else v
        f = d[j]
        for k in range(n):
            d[k] -= f * T[r, k]
        basis[r] = j
        pivots += 1
        degenerate = degenerate + 1 if ratio <= feas_tol else 0


class _Tableau:
    def __init__(self, A, b, c, basis, opts, start=None):
        self.A0, self.b0 = A, b
        self.c = c
        self.basis = np.array(basis, dtype=np.int64)
        self.opts = opts
        if start is None:
            self.refactor()
        else:
            # (B^-1 A, B^-1 b) for this basis, computed earlier
            self.T, self.rhs = start[0].copy(), start[1].copy()
            self.d = self.c - self.c[self.basis] @ self.T

    def refactor(self):
        B = self.A0[:, self.basis]
        self.T = np.linalg.solve(B, self.A0) if len(self.basis) else self.A0.copy()
        self.rhs = np.linalg.solve(B, self.b0) if len(self.basis) else self.b0.copy()
        self.T[np.abs(self.T) < 1e-13] = 0.0
        self.rhs[np.abs(self.rhs) < 1e-13] = 0.0
        self.d = self.c - self.c[self.basis] @ self.T

    def pivot(self, r, j):
        T = self.T
        prow = T[r] / T[r, j]
        prhs = self.rhs[r] / T[r, j]
        colj = T[:, j].copy()
        colj[r] = 0.0
        T -= np.outer(colj, prow)
        T[r] = prow
        self.rhs -= colj * prhs
        self.rhs[r] = prhs
        self.d = self.d - self.d[j] * prow
        self.basis[r] = j
        small = np.abs(T) < 1e-13
        if small.any():
            T[small] = 0.0
        self.rhs[np.abs(self.rhs) < 1e-13] = 0.0

    def run(self, allowed, counter):
        opts = self.opts
        degenerate = 0
        while True:
            budget = min(opts.refactor_every, opts.max_iters - counter[0])
            code, done, degenerate = _pivot_loop(
                self.T, self.rhs, self.d, self.basis, allowed, opts.opt_tol, opts.pivot_tol,
                opts.feas_tol, opts.pivot_rule == "bland", opts.stall_window, budget, degenerate)
            counter[0] += done
            if code == 0:
                return "optimal"
            if code == 1:
                return "unbounded"
            if counter[0] >= opts.max_iters:
                raise IterationLimitError(f"simplex exceeded {opts.max_iters} iterations")
            self.refactor()


@dataclass(frozen=True, eq=False)
class _PhaseOne:
    sf: _StandardForm
    flip: np.ndarray
    A: np.ndarray      # rows kept after dropping redundant ones, sign-flipped
    b: np.ndarray
    keep: np.ndarray
    basis: np.ndarray  # feasible starting basis for phase 2
    iterations: int
    infeasible: bool
    start: tuple | None = None  # phase-2 tableau (B^-1 A, B^-1 b) at ``basis``

    def with_start(self) -> "_PhaseOne":
        if self.infeasible or not len(self.basis):
            return self
        B = self.A[:, self.basis]
        T = np.linalg.solve(B, self.A)
        rhs = np.linalg.solve(B, self.b)
        T[np.abs(T) < 1e-13] = 0.0
        rhs[np.abs(rhs) < 1e-13] = 0.0
        return _PhaseOne(self.sf, self.flip, self.A, self.b, self.keep, self.basis, self.iterations,
                         False, (T, rhs))


# Phase 1 never looks at the objective, so its outcome is memoized per
# constraint set (LPs made with ``with_objective`` share their matrices).
# This repeats the identical computation; it is not a warm start.
_PHASE_ONE_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()
_PHASE_ONE_CACHE_SIZE = 16


def _phase_one(lp: LinearProgram, opts: SolveOptions) -> _PhaseOne:
    key = (id(lp.A_eq), id(lp.A_ub), opts)
    vecs = (lp.b_eq, lp.b_ub, lp.lower, lp.upper)
    hit = _PHASE_ONE_CACHE.get(key)
    if (hit is not None and hit[0] is lp.A_eq and hit[1] is lp.A_ub
            and all(np.array_equal(u, v) for u, v in zip(hit[2], vecs))):
        _PHASE_ONE_CACHE.move_to_end(key)
        return hit[3]
    ph = _run_phase_one(lp, opts).with_start()
    _PHASE_ONE_CACHE[key] = (lp.A_eq, lp.A_ub, vecs, ph)
    if len(_PHASE_ONE_CACHE) > _PHASE_ONE_CACHE_SIZE:
        _PHASE_ONE_CACHE.popitem(last=False)
    return ph


def _run_phase_one(lp: LinearProgram, opts: SolveOptions) -> _PhaseOne:
    sf = _StandardForm(lp)
    A, b = sf.A.copy(), sf.b.copy()
    m, ncols = A.shape
    flip = np.where(b < 0, -1.0, 1.0)
    A *= flip[:, None]
    b *= flip

    # initial basis: slacks with +1 coefficient where possible, artificials elsewhere
    basis = np.full(m, -1, dtype=np.int64)
    slack0 = sf.nz
    for r in range(sf.m_eq, m):
        if flip[r] > 0:
            basis[r] = slack0 + (r - sf.m_eq)
    art_rows = np.flatnonzero(basis < 0)
    n_art = len(art_rows)
    keep = np.ones(m, dtype=bool)
    if not n_art:
        return _PhaseOne(sf, flip, A, b, keep, basis, 0, False)
    A_full = np.hstack([A, np.zeros((m, n_art))])
    for k, r in enumerate(art_rows):
        A_full[r, ncols + k] = 1.0
        basis[r] = ncols + k
    counter = [0]
    c1 = np.zeros(ncols + n_art)
    c1[ncols:] = 1.0
    tab = _Tableau(A_full, b, c1, basis, opts)
    tab.run(np.ones(ncols + n_art, dtype=bool), counter)
    infeas = float(c1[tab.basis] @ tab.rhs)
    if infeas > opts.feas_tol * (1.0 + np.abs(b).max(initial=0.0)):
        return _PhaseOne(sf, flip, A, b, keep, tab.basis, counter[0], True)
    # drive zero-level artificials out of the basis; drop redundant rows.
    # A zero tableau row means the artificial's own constraint row is a
    # combination of the others, so that row goes, not tableau position r.
    in_basis = np.ones(m, dtype=bool)
    for r in range(m):
        j_art = tab.basis[r]
        if j_art >= ncols:
            row = np.abs(tab.T[r, :ncols])
            row[tab.basis[tab.basis < ncols]] = 0.0
            j = int(np.argmax(row)) if ncols else 0
            if ncols and row[j] > opts.pivot_tol:
                tab.pivot(r, j)
                counter[0] += 1
            else:
                keep[art_rows[j_art - ncols]] = False
                in_basis[r] = False
    return _PhaseOne(sf, flip, A[keep], b[keep], keep, tab.basis[in_basis].copy(), counter[0], False)


def solve(lp: LinearProgram, options: SolveOptions | None = None, **overrides) -> SolveResult:
    """Solve a carrier LP with the two-phase simplex method.

    Raises :class:`IterationLimitError` when ``max_iters`` is exceeded;
    infeasible and unbounded problems are reported through ``status``.
    """
    opts = options or DEFAULT_OPTIONS
    if overrides:
        opts = SolveOptions(**{**opts.__dict__, **overrides})
    ph = _phase_one(lp, opts)
    counter = [ph.iterations]
    if ph.infeasible:
        return SolveResult("infeasible", float("nan"), np.full(lp.n_columns, np.nan),
                           tuple(), counter[0], None, ph.iterations)
    sf, A2, b2, keep, flip = ph.sf, ph.A, ph.b, ph.keep, ph.flip
    m, ncols = sf.A.shape
    c, const = sf.cost(lp)
    phase1_iters = ph.iterations
    tab = _Tableau(A2, b2, c, ph.basis.copy(), opts, ph.start)
    status = tab.run(np.ones(ncols, dtype=bool), counter)
    z = np.zeros(ncols)
    z[tab.basis] = tab.rhs
    z = np.maximum(z, 0.0)
    x = sf.to_carrier(z)
    value_min = float(c @ z) + const
    value = -value_min if lp.sense == "max" else value_min

    # duals of the (unflipped) minimization form from the final basis
    y = np.zeros(m)
    if len(tab.basis):
        y_kept = np.linalg.solve(A2[:, tab.basis].T, c[tab.basis])
        y[keep] = y_kept
    y *= flip
    if status == "unbounded":
        value = np.inf if lp.sense == "max" else -np.inf
    return SolveResult(status, value, x, tuple(sorted(int(k) for k in tab.basis)), counter[0], y, phase1_iters)


def dual_gap(lp: LinearProgram, result: SolveResult) -> dict[str, float]:
    """Weak-duality diagnostics for a solved LP with zero lower bounds.

    Returns the primal-dual objective gap, the most negative reduced cost and
    the largest wrong-signed inequality multiplier, all in minimization form.
    """
    if np.any(lp.lower != 0):
        raise ValueError("dual_gap assumes zero lower bounds")
    c_min = -lp.objective if lp.sense == "max" else lp.objective
    fin = np.flatnonzero(np.isfinite(lp.upper))
    blocks = [lp.A_eq.toarray(), lp.A_ub.toarray(), np.eye(lp.n_columns)[fin]]
    A_all = np.vstack(blocks)
    b_all = np.concatenate([lp.b_eq, lp.b_ub, lp.upper[fin]])
    y = result.duals
    reduced = c_min - A_all.T @ y
    m_eq = lp.A_eq.shape[0]
    primal_min = float(c_min @ result.primal)
    dual_obj = float(b_all @ y)
    return {
        "gap": abs(primal_min - dual_obj),
        "min_reduced_cost": float(reduced.min(initial=0.0)),
        "max_inequality_multiplier": float(y[m_eq:].max(initial=0.0)),
    }
