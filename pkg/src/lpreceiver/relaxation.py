"""LP relaxations of a factor graph and extraction of receiver outputs.

Three programs are compiled from a :class:`~lpreceiver.factor_graph.FactorGraph`:

* the exhaustive optimum (:func:`solve_lp1`), used as an oracle;
* the marginal-polytope relaxation over (g, p) for every variable
  (:func:`build_lp2`);
* the reduced relaxation that keeps only non-anchor observed marginals and
  ties hidden variables through an anchor factor (:func:`build_lp3`).

:func:`map_v` / :func:`map_v_inverse` translate between the feasible sets of
the last two, and :func:`extract_output` turns a solver result into a
configuration or a :class:`ReceiverFailure`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import (
    ConfigurationError,
    InternalError,
    NoValidConfigurationError,
    NotInPolytopeError,
)
from .factor_graph import DEFAULT_ENUMERATION_CAP, FactorGraph, enumerate_behavior, is_valid
from .lp import LinearProgram, LPBuilder
from .simplex import SolveResult, solve

DEFAULT_INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class AnchorTable:
    """Anchor symbol per variable and anchor factor per hidden variable."""

    anchor_element: Mapping[str, object]
    anchor_factor: Mapping[str, str]


def default_anchors(graph: FactorGraph) -> AnchorTable:
    """First symbol of every alphabet; first incident factor of every hidden variable."""
    elements = {v: graph.variables[v][0] for v in graph.var_ids}
    factors = {}
    for v in graph.hidden:
        if not graph.incident[v]:
            raise ConfigurationError(f"hidden variable {v!r} has no incident factor")
        factors[v] = graph.incident[v][0]
    return AnchorTable(elements, factors)


def validate_anchors(graph: FactorGraph, anchors: AnchorTable) -> None:
    for v in graph.var_ids:
        if v not in anchors.anchor_element:
            raise ConfigurationError(f"anchor element missing for {v!r}")
        if anchors.anchor_element[v] not in graph.symbol_index[v]:
            raise ConfigurationError(f"anchor element of {v!r} is not in its alphabet")
    for v in graph.hidden:
        t = anchors.anchor_factor.get(v)
        if t is None:
            raise ConfigurationError(f"anchor factor missing for hidden variable {v!r}")
        if t not in graph.incident[v]:
            raise ConfigurationError(f"anchor factor {t!r} does not touch {v!r}")


def _reduced_symbols(graph: FactorGraph, anchors: AnchorTable, v: str) -> list[int]:
    a = graph.symbol_index[v][anchors.anchor_element[v]]
    return [k for k in range(len(graph.variables[v])) if k != a]


def cost_vector(graph: FactorGraph, variant: str = "lambda", anchors: AnchorTable | None = None) -> dict:
    """Cost entries keyed by ``(variable, symbol)``.

    ``lambda`` gives log h_i(a) for every observed symbol; ``lambda_tilde``
    gives log[h_i(a)/h_i(anchor)] for non-anchor symbols only.
    """
    out = {}
    for v in graph.observed:
        w = graph.observations[v].weights
        if variant == "lambda":
            for s in graph.variables[v]:
                out[(v, s)] = math.log(w[s])
        elif variant == "lambda_tilde":
            a = anchors.anchor_element[v]
            for s in graph.variables[v]:
                if s != a:
                    out[(v, s)] = math.log(w[s] / w[a])
        else:
            raise ValueError(f"unknown cost variant {variant!r}")
    return out


def anchor_constant(graph: FactorGraph, anchors: AnchorTable) -> float:
    """Sum of log h_i(anchor_i) over observed variables: LP2 value minus LP3 value."""
    return sum(math.log(graph.observations[v].weights[anchors.anchor_element[v]]) for v in graph.observed)


# --------------------------------------------------------------------- points


@dataclass(eq=False)
class PolytopePoint:
    """A point (g-bar, p): per-variable marginals and per-factor distributions.

    Entries may be floats or :class:`fractions.Fraction` (object arrays).
    ``g[v]`` follows the alphabet order of ``v``; ``p[f]`` the behavior order.
    """

    g: dict[str, np.ndarray]
    p: dict[str, np.ndarray]

    def is_integral(self, tol: float = DEFAULT_INTEGRALITY_TOL) -> bool:
        for arr in (*self.g.values(), *self.p.values()):
            a = np.asarray(arr, dtype=float)
            if np.any(np.minimum(np.abs(a), np.abs(a - 1.0)) > tol):
                return False
        return True

    def marginal(self, graph: FactorGraph, fid: str, var: str) -> np.ndarray:
        return factor_marginal(graph, fid, var, self.p[fid])

    def flat(self, graph: FactorGraph) -> np.ndarray:
        """g-bar in canonical full-vector layout."""
        return np.concatenate([np.asarray(self.g[v], dtype=float) for v in graph.var_ids])

    def observed_marginals(self, graph: FactorGraph) -> dict[str, np.ndarray]:
        return {v: self.g[v] for v in graph.observed}


def factor_marginal(graph: FactorGraph, fid: str, var: str, p_j) -> np.ndarray:
    """Marginal of factor distribution ``p_j`` on one scope variable."""
    k = graph.factors[fid].scope.index(var)
    rows = graph.rows[fid][:, k]
    n = len(graph.variables[var])
    p_j = np.asarray(p_j)
    if p_j.dtype == object:
        out = np.array([Fraction(0)] * n, dtype=object)
        for r, val in zip(rows, p_j):
            out[r] += val
        return out
    return np.bincount(rows, weights=p_j, minlength=n).astype(float)


def indicator_point(graph: FactorGraph, x) -> PolytopePoint:
    """(Xi-bar(x), indicator p) for a configuration; in Q whenever x is valid."""
    g = {}
    for v in graph.var_ids:
        arr = np.zeros(len(graph.variables[v]))
        arr[graph.symbol_index[v][x[v]]] = 1.0
        g[v] = arr
    p = {}
    for fid in graph.factor_ids:
        arr = np.zeros(len(graph.factors[fid].behavior))
        k = graph.row_index[fid].get(graph.projection(x, fid))
        if k is not None:
            arr[k] = 1.0
        p[fid] = arr
    return PolytopePoint(g, p)


def _close(a, b, tol) -> bool:
    if tol == 0:
        return a == b
    return abs(float(a) - float(b)) <= tol


def polytope_violations(graph: FactorGraph, point: PolytopePoint, tol: float = 1e-9) -> list[str]:
    """Violated constraints of Q (nonnegativity, normalization, marginal consistency)."""
    bad = []
    for fid in graph.factor_ids:
        p_j = point.p.get(fid)
        if p_j is None or len(p_j) != len(graph.factors[fid].behavior):
            bad.append(f"factor {fid}: distribution missing or wrong length")
            continue
        if any(float(val) < -tol for val in p_j):
            bad.append(f"factor {fid}: negative entry")
        total = sum(p_j, Fraction(0)) if np.asarray(p_j).dtype == object else float(np.sum(p_j))
        if not _close(total, 1, tol):
            bad.append(f"factor {fid}: sums to {float(total)!r}")
        for v in graph.factors[fid].scope:
            marg = factor_marginal(graph, fid, v, p_j)
            for k, s in enumerate(graph.variables[v]):
                if not _close(point.g[v][k], marg[k], tol):
                    bad.append(f"factor {fid}, variable {v}, symbol {s!r}: g={float(point.g[v][k])!r} "
                               f"marginal={float(marg[k])!r}")
    for v in graph.var_ids:
        if v in graph.observations and not graph.incident[v]:
            total = sum(point.g[v])
            if not _close(total, 1, tol):
                bad.append(f"variable {v}: marginal sums to {float(total)!r}")
    return bad


def reduced_violations(graph: FactorGraph, g_tilde, p, anchors: AnchorTable, tol: float = 1e-9) -> list[str]:
    """Violated constraints of the reduced polytope (LP3 feasible set)."""
    bad = []
    for fid in graph.factor_ids:
        p_j = p.get(fid)
        if p_j is None or len(p_j) != len(graph.factors[fid].behavior):
            bad.append(f"factor {fid}: distribution missing or wrong length")
            continue
        if any(float(val) < -tol for val in p_j):
            bad.append(f"factor {fid}: negative entry")
        if not _close(sum(p_j), 1, tol):
            bad.append(f"factor {fid}: sums to {float(sum(p_j))!r}")
    for v in graph.observed:
        keep = _reduced_symbols(graph, anchors, v)
        for fid in graph.incident[v]:
            if fid not in p:
                continue
            marg = factor_marginal(graph, fid, v, p[fid])
            for pos, k in enumerate(keep):
                if not _close(g_tilde[v][pos], marg[k], tol):
                    bad.append(f"observed {v}, factor {fid}, symbol {graph.variables[v][k]!r}")
    for v in graph.hidden:
        t = anchors.anchor_factor[v]
        if t not in p:
            continue
        ref = factor_marginal(graph, t, v, p[t])
        for fid in graph.incident[v]:
            if fid == t or fid not in p:
                continue
            marg = factor_marginal(graph, fid, v, p[fid])
            for k in _reduced_symbols(graph, anchors, v):
                if not _close(marg[k], ref[k], tol):
                    bad.append(f"hidden {v}, factor {fid} vs anchor {t}, symbol {graph.variables[v][k]!r}")
    return bad


def map_v(g_tilde, p, graph: FactorGraph, anchors: AnchorTable, tol: float = 1e-9) -> PolytopePoint:
    """Lift a reduced point (g-tilde, p) to the full polytope point (g-bar, p)."""
    validate_anchors(graph, anchors)
    bad = reduced_violations(graph, g_tilde, p, anchors, tol)
    if bad:
        raise NotInPolytopeError("point is not in the reduced polytope", bad)
    exact = any(np.asarray(arr).dtype == object for arr in p.values())
    g = {}
    for v in graph.var_ids:
        n = len(graph.variables[v])
        if v in graph.observations:
            a = graph.symbol_index[v][anchors.anchor_element[v]]
            arr = np.array([Fraction(0)] * n, dtype=object) if exact else np.zeros(n)
            keep = _reduced_symbols(graph, anchors, v)
            for pos, k in enumerate(keep):
                arr[k] = g_tilde[v][pos]
            arr[a] = 1 - sum(arr[k] for k in keep)
            g[v] = arr
        else:
            t = anchors.anchor_factor[v]
            g[v] = factor_marginal(graph, t, v, p[t])
    return PolytopePoint(g, {fid: np.asarray(p[fid]) for fid in graph.factor_ids})


def map_v_inverse(point: PolytopePoint, graph: FactorGraph, anchors: AnchorTable, tol: float = 1e-9):
    """Project a full polytope point onto the reduced coordinates."""
    validate_anchors(graph, anchors)
    bad = polytope_violations(graph, point, tol)
    if bad:
        raise NotInPolytopeError("point is not in the polytope", bad)
    g_tilde = {}
    for v in graph.observed:
        keep = _reduced_symbols(graph, anchors, v)
        g_tilde[v] = np.asarray(point.g[v])[keep]
    return g_tilde, dict(point.p)


def lp2_cost(graph: FactorGraph, point: PolytopePoint) -> float:
    return float(sum(graph.log_weights(v) @ np.asarray(point.g[v], dtype=float) for v in graph.observed))


def lp3_cost(graph: FactorGraph, g_tilde, anchors: AnchorTable) -> float:
    total = 0.0
    for v in graph.observed:
        lam = graph.log_weights(v)
        a = graph.symbol_index[v][anchors.anchor_element[v]]
        keep = _reduced_symbols(graph, anchors, v)
        total += float((lam[keep] - lam[a]) @ np.asarray(g_tilde[v], dtype=float))
    return total


# --------------------------------------------------------------------- LP1


@dataclass(frozen=True)
class LP1Result:
    configuration: dict
    value: float
    tied: bool
    n_valid: int


def solve_lp1(graph: FactorGraph, cap: int | None = DEFAULT_ENUMERATION_CAP) -> LP1Result:
    """Exact optimum by enumerating the global behavior.

    A linear objective over the hull of configuration vectors peaks at a
    vertex, so enumeration solves the hull program exactly.  Ties go to the
    canonically smallest configuration and set ``tied``.
    """
    best, best_val, best_key, tied, count = None, -math.inf, None, False, 0
    for x in enumerate_behavior(graph, cap):
        count += 1
        val = graph.score(x)
        key = graph.configuration_key(x)
        scale = 1e-12 * (1.0 + abs(val))
        if val > best_val + scale:
            best, best_val, best_key, tied = x, val, key, False
        elif abs(val - best_val) <= scale:
            tied = True
            if key < best_key:
                best, best_val, best_key = x, max(val, best_val), key
    if best is None:
        raise NoValidConfigurationError("global behavior is empty")
    return LP1Result(best, best_val, tied, count)


# --------------------------------------------------------------------- LP2 / LP3


def _require_factor_cover(graph: FactorGraph):
    for v in graph.observed:
        if not graph.incident[v]:
            raise ConfigurationError(f"observed variable {v!r} is in no indicator factor")


def _add_p_columns(b: LPBuilder, graph: FactorGraph) -> dict[str, list[int]]:
    cols = {}
    for fid in graph.factor_ids:
        cols[fid] = [b.column(("p", fid, k)) for k in range(len(graph.factors[fid].behavior))]
    return cols


def build_lp2(graph: FactorGraph) -> LinearProgram:
    """Maximize lambda.g over Q: columns g(i, a) for every variable, then p(j, b)."""
    _require_factor_cover(graph)
    b = LPBuilder()
    gcol = {}
    for v in graph.var_ids:
        lam = graph.log_weights(v) if v in graph.observations else np.zeros(len(graph.variables[v]))
        for k, s in enumerate(graph.variables[v]):
            gcol[(v, k)] = b.column(("g", v, s), cost=float(lam[k]))
    pcol = _add_p_columns(b, graph)
    for fid in graph.factor_ids:
        b.equality({c: 1.0 for c in pcol[fid]}, 1.0, ("sum", fid))
        rows = graph.rows[fid]
        for pos, v in enumerate(graph.factors[fid].scope):
            for k, s in enumerate(graph.variables[v]):
                coefs = {gcol[(v, k)]: 1.0}
                for r in np.flatnonzero(rows[:, pos] == k):
                    coefs[pcol[fid][r]] = -1.0
                b.equality(coefs, 0.0, ("marg", fid, v, s))
    return b.build(sense="max", kind="lp2")


def build_lp3(graph: FactorGraph, anchors: AnchorTable | None = None) -> LinearProgram:
    """Reduced relaxation: g-tilde columns for non-anchor observed symbols, then p(j, b)."""
    _require_factor_cover(graph)
    anchors = anchors or default_anchors(graph)
    validate_anchors(graph, anchors)
    b = LPBuilder()
    gcol = {}
    for v in graph.observed:
        lam = graph.log_weights(v)
        a = graph.symbol_index[v][anchors.anchor_element[v]]
        for k in _reduced_symbols(graph, anchors, v):
            gcol[(v, k)] = b.column(("gt", v, graph.variables[v][k]), cost=float(lam[k] - lam[a]))
    pcol = _add_p_columns(b, graph)
    for fid in graph.factor_ids:
        b.equality({c: 1.0 for c in pcol[fid]}, 1.0, ("sum", fid))

    def marginal_coefs(fid, v, k, sign):
        pos = graph.factors[fid].scope.index(v)
        return {pcol[fid][r]: sign for r in np.flatnonzero(graph.rows[fid][:, pos] == k)}

    for v in graph.var_ids:
        keep = _reduced_symbols(graph, anchors, v)
        if v in graph.observations:
            for fid in graph.incident[v]:
                for k in keep:
                    coefs = {gcol[(v, k)]: 1.0, **marginal_coefs(fid, v, k, -1.0)}
                    b.equality(coefs, 0.0, ("obs", fid, v, graph.variables[v][k]))
        else:
            t = anchors.anchor_factor[v]
            for fid in graph.incident[v]:
                if fid == t:
                    continue
                for k in keep:
                    coefs = marginal_coefs(fid, v, k, 1.0)
                    for c, val in marginal_coefs(t, v, k, -1.0).items():
                        coefs[c] = coefs.get(c, 0.0) + val
                    b.equality(coefs, 0.0, ("hid", fid, t, v, graph.variables[v][k]))
    meta = {"anchors": anchors}
    return b.build(sense="max", kind="lp3", meta=meta)


# --------------------------------------------------------------------- outputs


@dataclass(eq=False)
class ReceiverFailure:
    """Fractional LP optimum: the receiver declares failure and keeps the point."""

    point: PolytopePoint
    objective_value: float = float("nan")
    info: dict = field(default_factory=dict)


def complete_factor(graph: FactorGraph, fid: str, g: Mapping[str, np.ndarray], tol: float = 1e-7) -> np.ndarray:
    """Find a distribution on a factor's behavior with the given scope marginals."""
    rows = graph.rows[fid]
    n_rows = len(rows)
    if n_rows == 1:
        return np.ones(1)
    scope = graph.factors[fid].scope
    blocks = [np.asarray(g[v], dtype=float) for v in scope]
    if all(np.all(np.minimum(np.abs(a), np.abs(a - 1)) <= 1e-9) for a in blocks):
        # integral marginals force the indicator of the matching row, if any
        key = tuple(int(np.argmax(a)) for a in blocks)
        hit = np.flatnonzero(np.all(rows == np.array(key), axis=1))
        if hit.size:
            p_j = np.zeros(n_rows)
            p_j[hit[0]] = 1.0
            return p_j
    b = LPBuilder()
    cols = [b.column(("p", fid, k)) for k in range(n_rows)]
    b.equality({c: 1.0 for c in cols}, 1.0)
    for pos, v in enumerate(graph.factors[fid].scope):
        for k in range(len(graph.variables[v]) - 1):
            b.equality({cols[r]: 1.0 for r in np.flatnonzero(rows[:, pos] == k)}, float(g[v][k]))
    res = solve(b.build(sense="min", kind="completion"))
    if res.status != "optimal":
        raise NotInPolytopeError(f"no distribution on factor {fid!r} matches the given marginals",
                                 [f"factor {fid}: completion {res.status}"])
    p_j = np.maximum(res.primal, 0.0)
    p_j[np.abs(p_j) < 1e-12] = 0.0
    return p_j / p_j.sum()


def point_from_solution(lp: LinearProgram, solution: SolveResult, graph: FactorGraph,
                        anchors: AnchorTable | None = None) -> PolytopePoint:
    """Rebuild the full polytope point represented by an LP solution.

    Works for any LP whose columns are labelled ``("g", v, s)``,
    ``("gt", v, s)``, ``("p", f, k)`` or anything else (ignored).  Factor
    distributions absent from the LP are completed from marginals; variables
    without explicit g take the marginal of their anchor factor.
    """
    x = solution.primal
    anchors = anchors or lp.meta.get("anchors") or default_anchors(graph)
    p = {fid: np.zeros(len(graph.factors[fid].behavior)) for fid in graph.factor_ids}
    have_p = set()
    g_explicit: dict[str, np.ndarray] = {}
    g_tilde: dict[str, dict] = {}
    for k, lab in enumerate(lp.column_labels):
        tag = lab[0]
        if tag == "p":
            p[lab[1]][lab[2]] = x[k]
            have_p.add(lab[1])
        elif tag == "g":
            v = lab[1]
            g_explicit.setdefault(v, np.zeros(len(graph.variables[v])))[graph.symbol_index[v][lab[2]]] = x[k]
        elif tag == "gt":
            g_tilde.setdefault(lab[1], {})[graph.symbol_index[lab[1]][lab[2]]] = x[k]
    for fid in p:
        p[fid] = np.where(np.abs(p[fid]) < 1e-12, 0.0, p[fid])
    g: dict[str, np.ndarray] = dict(g_explicit)
    for v, entries in g_tilde.items():
        arr = np.zeros(len(graph.variables[v]))
        for k, val in entries.items():
            arr[k] = val
        a = graph.symbol_index[v][anchors.anchor_element[v]]
        arr[a] = 1.0 - sum(entries.values())
        g[v] = arr

    def marginal_from_known(v):
        for fid in ([anchors.anchor_factor[v]] if v in anchors.anchor_factor else []) + list(graph.incident[v]):
            if fid in have_p:
                return factor_marginal(graph, fid, v, p[fid])
        return None

    for v in graph.var_ids:
        if v not in g:
            m = marginal_from_known(v)
            if m is not None:
                g[v] = m
    for fid in graph.factor_ids:
        if fid in have_p:
            continue
        scope = graph.factors[fid].scope
        if len(graph.factors[fid].behavior) == 1:
            p[fid] = np.ones(1)
        elif all(v in g for v in scope):
            p[fid] = complete_factor(graph, fid, g)
        else:
            raise ConfigurationError(f"cannot reconstruct distribution of factor {fid!r}")
        have_p.add(fid)
    for v in graph.var_ids:
        if v not in g:
            g[v] = marginal_from_known(v)
    return PolytopePoint(g, p)


def decode_point(point: PolytopePoint, graph: FactorGraph, tolerance: float = DEFAULT_INTEGRALITY_TOL):
    """Configuration for an integral point, else :class:`ReceiverFailure`."""
    if not point.is_integral(tolerance):
        return ReceiverFailure(point)
    x = {}
    for v in graph.var_ids:
        block = np.rint(np.asarray(point.g[v], dtype=float))
        hot = np.flatnonzero(block == 1)
        if len(hot) != 1 or block.sum() != 1:
            raise InternalError(f"integral point has a non-indicator block for {v!r}")
        x[v] = graph.variables[v][hot[0]]
    if not is_valid(graph, x):
        raise InternalError("integral LP optimum decodes to an invalid configuration")
    return x


def extract_output(solution: SolveResult, lp: LinearProgram, graph: FactorGraph,
                   tolerance: float = DEFAULT_INTEGRALITY_TOL, anchors: AnchorTable | None = None):
    """Receiver output for a solved relaxation: a configuration or a failure."""
    if solution.status != "optimal":
        raise ValueError(f"solver status is {solution.status!r}, not optimal")
    point = point_from_solution(lp, solution, graph, anchors)
    out = decode_point(point, graph, tolerance)
    if isinstance(out, ReceiverFailure):
        out.objective_value = solution.objective_value
    return out


def solve_relaxation(graph: FactorGraph, which: str = "lp3", anchors: AnchorTable | None = None,
                     tolerance: float = DEFAULT_INTEGRALITY_TOL, **solve_kw):
    """Build, solve and decode LP2 or LP3 in one call.  Returns (output, lp, result)."""
    lp = build_lp2(graph) if which == "lp2" else build_lp3(graph, anchors)
    res = solve(lp, **solve_kw)
    return extract_output(res, lp, graph, tolerance, anchors), lp, res
