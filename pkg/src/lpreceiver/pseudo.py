"""Pseudoconfiguration analysis: system pseudodistance, pairwise error
probability, graph-cover realization of rational polytope points, and the
AWGN pseudoweight of memoryless BPSK systems."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import (IdenticalPseudoconfigurationError, MalformedCoverError, NotRealizableError,
                     UnsupportedModeError)
from .factor_graph import FactorGraph, _to_json
from .relaxation import PolytopePoint, polytope_violations

SNAP_DENOMINATOR_CAP = 10**4
SNAP_TOL = 1e-9
POINT_FORMAT = "lpreceiver-pseudoconfiguration/1"


@dataclass(frozen=True)
class SignalMap:
    """Noiseless signal point s_i(alpha) for every observed variable.

    ``symbols[v]`` lists the alphabet of ``v`` in the order used by the
    marginal vectors ``g[v]`` of any point passed alongside this map.
    """

    symbols: dict
    values: dict

    @classmethod
    def from_dict(cls, points: Mapping[str, Mapping]) -> "SignalMap":
        symbols = {v: tuple(pts) for v, pts in points.items()}
        values = {v: np.array([pts[s] for s in symbols[v]]) for v, pts in points.items()}
        for v, arr in values.items():
            if len(set(arr.tolist())) != len(arr):
                raise ValueError(f"signal map of {v!r} is not injective")
        return cls(symbols, values)

    @property
    def is_real(self) -> bool:
        return all(not np.iscomplexobj(a) or not np.any(np.imag(a)) for a in self.values.values())


@dataclass(frozen=True)
class Pseudoconfiguration:
    point: PolytopePoint
    is_configuration: bool


def _marginals(kappa, smap: SignalMap) -> dict:
    """Observed marginals of a point, or indicator vectors of a configuration."""
    if isinstance(kappa, Pseudoconfiguration):
        kappa = kappa.point
    if isinstance(kappa, PolytopePoint):
        return {v: np.asarray(kappa.g[v], dtype=float) for v in smap.symbols}
    out = {}
    for v, syms in smap.symbols.items():
        arr = np.zeros(len(syms))
        arr[syms.index(kappa[v])] = 1.0
        out[v] = arr
    return out


def tmv(x_bar, kappa, smap: SignalMap):
    """Vectors t (transmitted signal), m (mean signal) and v (mean squared signal)."""
    g = _marginals(kappa, smap)
    names = list(smap.symbols)
    t = np.array([smap.values[v][smap.symbols[v].index(x_bar[v])] for v in names])
    m = np.array([g[v] @ smap.values[v] for v in names])
    v = np.array([g[u] @ np.abs(smap.values[u]) ** 2 for u in names])
    return t, m, v


def pseudodistance(x_bar, kappa, smap: SignalMap, mode: str = "real") -> float:
    """Effective Euclidean distance between configuration ``x_bar`` and point ``kappa``.

    ``kappa`` may be a :class:`PolytopePoint`, a :class:`Pseudoconfiguration`
    or a configuration mapping.  ``mode`` selects the real or complex AWGN
    formula; on real signal maps the two agree.
    """
    if mode not in ("real", "complex"):
        raise UnsupportedModeError(f"unknown pseudodistance mode {mode!r}")
    t, m, v = tmv(x_bar, kappa, smap)
    if mode == "real":
        if not smap.is_real:
            raise UnsupportedModeError("real-mode pseudodistance needs a real signal map")
        t, m = np.real(t), np.real(m)
        den = math.sqrt(float(np.sum((m - t) ** 2)))
        num = abs(float(np.sum(t**2 + v - 2 * t * m)))
    else:
        den = float(np.linalg.norm(m - t))
        # E_g |s - s(x)|^2 = E|s|^2 - 2 Re(conj(t) E s) + |t|^2
        num = abs(float(np.sum(v - 2 * np.real(np.conj(t) * m) + np.abs(t) ** 2)))
    if den <= 1e-12:
        raise IdenticalPseudoconfigurationError("pseudoconfiguration has the same mean signal as x_bar")
    return num / den


def q_function(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def pairwise_error_probability(d_eff: float, sigma: float) -> float:
    """Q(d_eff / (2 sigma))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return q_function(d_eff / (2.0 * sigma))


def awgn_pseudoweight(kappa, graph: FactorGraph, variables, reference=None, memory: int = 0) -> float:
    """(sum w)^2 / sum w^2 with w_i = |g_i(1) - c_i| over the given binary variables.

    ``reference`` is the transmitted binary word (all-zero by default).  Only
    defined for memoryless BPSK systems, where it equals d_eff^2 / 4.
    """
    if memory != 0:
        raise UnsupportedModeError("AWGN pseudoweight is defined for memoryless (L = 0) systems only")
    point = kappa.point if isinstance(kappa, Pseudoconfiguration) else kappa
    ref = np.zeros(len(variables)) if reference is None else np.asarray(reference, dtype=float)
    omega = np.array([abs(float(point.g[v][graph.symbol_index[v][1]]) - r) for v, r in zip(variables, ref)])
    denom = float(np.sum(omega**2))
    if denom == 0:
        raise IdenticalPseudoconfigurationError("point coincides with the reference codeword")
    return float(np.sum(omega)) ** 2 / denom


# ---------------------------------------------------------------- rational snap


def snap_value(x: float, cap: int = SNAP_DENOMINATOR_CAP, tol: float = SNAP_TOL) -> Fraction | None:
    """Closest fraction with denominator <= cap (continued fractions), or None if off by > tol."""
    f = Fraction(float(x)).limit_denominator(cap)
    return f if abs(float(f) - float(x)) <= tol else None


def snap_point(point: PolytopePoint, graph: FactorGraph, cap: int = SNAP_DENOMINATOR_CAP,
               tol: float = SNAP_TOL) -> PolytopePoint:
    """Exact rational copy of a point, rechecked against every constraint of Q."""
    def snap_arr(arr, what):
        out = np.empty(len(arr), dtype=object)
        for k, val in enumerate(arr):
            if isinstance(val, Fraction):
                out[k] = val
                continue
            f = snap_value(val, cap, tol)
            if f is None:
                raise NotRealizableError(f"{what}[{k}] = {val!r} has no fraction with denominator <= {cap}")
            out[k] = f
        return out

    g = {v: snap_arr(point.g[v], f"g[{v}]") for v in graph.var_ids}
    p = {f: snap_arr(point.p[f], f"p[{f}]") for f in graph.factor_ids}
    exact = PolytopePoint(g, p)
    bad = polytope_violations(graph, exact, tol=0)
    if bad:
        raise NotRealizableError("snapped point leaves the polytope: " + "; ".join(bad[:5]))
    return exact


# ----------------------------------------------------------------- graph covers


@dataclass(frozen=True)
class CoverConfiguration:
    """Valid assignment on an M-fold cover.

    ``assignments[v][m]`` is the symbol of copy m of v.  Factor copy m of f
    reads copy ``permutations[(f, v)][m]`` of each scope variable v (0-based).
    """

    degree: int
    assignments: dict
    permutations: dict

    def local_tuple(self, graph: FactorGraph, fid: str, m: int) -> tuple:
        return tuple(self.assignments[v][self.permutations[(fid, v)][m]] for v in graph.factors[fid].scope)


def _check_shapes(cover: CoverConfiguration, graph: FactorGraph):
    M = cover.degree
    if M < 1:
        raise MalformedCoverError("cover degree must be at least 1")
    for v in graph.var_ids:
        if v not in cover.assignments or len(cover.assignments[v]) != M:
            raise MalformedCoverError(f"variable {v!r} needs {M} copies")
        for s in cover.assignments[v]:
            if s not in graph.symbol_index[v]:
                raise MalformedCoverError(f"symbol {s!r} is not in the alphabet of {v!r}")
    for fid in graph.factor_ids:
        for v in graph.factors[fid].scope:
            perm = cover.permutations.get((fid, v))
            if perm is None or sorted(perm) != list(range(M)):
                raise MalformedCoverError(f"edge ({fid!r}, {v!r}) needs a permutation of 0..{M - 1}")


def verify_cover(cover: CoverConfiguration, graph: FactorGraph) -> bool:
    """True iff every lifted local tuple lies in its factor's behavior."""
    _check_shapes(cover, graph)
    for fid in graph.factor_ids:
        allowed = graph.row_index[fid]
        for m in range(cover.degree):
            if cover.local_tuple(graph, fid, m) not in allowed:
                return False
    return True


def cover_to_normalized_vector(cover: CoverConfiguration, graph: FactorGraph) -> dict:
    """g-bar = h-bar / M with exact rational entries."""
    _check_shapes(cover, graph)
    M = cover.degree
    out = {}
    for v in graph.var_ids:
        counts = np.array([Fraction(0)] * len(graph.variables[v]), dtype=object)
        for s in cover.assignments[v]:
            counts[graph.symbol_index[v][s]] += 1
        out[v] = counts / M
    return out


def cover_to_point(cover: CoverConfiguration, graph: FactorGraph) -> PolytopePoint:
    """Normalized vector plus the local-tuple frequencies of every factor."""
    g = cover_to_normalized_vector(cover, graph)
    p = {}
    for fid in graph.factor_ids:
        counts = np.array([Fraction(0)] * len(graph.factors[fid].behavior), dtype=object)
        for m in range(cover.degree):
            k = graph.row_index[fid].get(cover.local_tuple(graph, fid, m))
            if k is None:
                raise MalformedCoverError(f"copy {m} of factor {fid!r} is not locally valid")
            counts[k] += 1
        p[fid] = counts / cover.degree
    return PolytopePoint(g, p)


def realize_cover(point: PolytopePoint, graph: FactorGraph, cap: int = SNAP_DENOMINATOR_CAP) -> CoverConfiguration:
    """Construct a valid cover configuration whose normalized vector is the point's g-bar.

    Degree M is the lcm of all denominators.  Copies of each variable are
    laid out symbol by symbol; factor copies take each behavior row M*p times;
    every edge permutation matches factor copies to variable copies holding
    the required symbol, in copy order.
    """
    exact = snap_point(point, graph, cap)
    M = 1
    for arr in (*exact.g.values(), *exact.p.values()):
        for f in arr:
            M = math.lcm(M, f.denominator)
    assignments = {}
    for v in graph.var_ids:
        copies = []
        for k, s in enumerate(graph.variables[v]):
            copies.extend([s] * int(exact.g[v][k] * M))
        assignments[v] = tuple(copies)
    permutations = {}
    for fid in graph.factor_ids:
        rows = graph.rows[fid]
        factor_rows = [k for k in range(len(rows)) for _ in range(int(exact.p[fid][k] * M))]
        for pos, v in enumerate(graph.factors[fid].scope):
            queues = {}
            for idx, s in enumerate(assignments[v]):
                queues.setdefault(graph.symbol_index[v][s], deque()).append(idx)
            perm = []
            for k in factor_rows:
                q = queues.get(int(rows[k, pos]))
                if not q:
                    raise NotRealizableError(f"symbol counts disagree on edge ({fid!r}, {v!r})")
                perm.append(q.popleft())
            permutations[(fid, v)] = tuple(perm)
    cover = CoverConfiguration(M, assignments, permutations)
    if not verify_cover(cover, graph):
        raise NotRealizableError("constructed cover is not valid")
    return cover


# --------------------------------------------------------------------- dumping


def _frac_str(x) -> str:
    f = x if isinstance(x, Fraction) else snap_value(x)
    return str(f) if f is not None else repr(float(x))


def point_to_dict(point: PolytopePoint, graph: FactorGraph | None = None) -> dict:
    """JSON-ready dump: exact rationals where they snap, plus decimal values."""
    def block(arr):
        return {"exact": [_frac_str(x) for x in arr], "approx": [float(x) for x in arr]}
    doc = {"format": POINT_FORMAT,
           "g": {v: block(a) for v, a in point.g.items()},
           "p": {f: block(a) for f, a in point.p.items()}}
    if graph is not None:
        doc["symbols"] = {v: [_to_json(s) for s in graph.variables[v]] for v in graph.var_ids}
    return doc


def point_from_dict(doc: Mapping) -> PolytopePoint:
    if doc.get("format") != POINT_FORMAT:
        raise ValueError(f"expected format {POINT_FORMAT!r}")

    def arr(b):
        return np.array([Fraction(s) for s in b["exact"]], dtype=object)
    return PolytopePoint({v: arr(b) for v, b in doc["g"].items()}, {f: arr(b) for f, b in doc.get("p", {}).items()})


def save_point(point: PolytopePoint, path, graph: FactorGraph | None = None):
    with open(path, "w") as fh:
        json.dump(point_to_dict(point, graph), fh, indent=1)


def load_point(path) -> PolytopePoint:
    with open(path) as fh:
        return point_from_dict(json.load(fh))


def as_pseudoconfiguration(point: PolytopePoint, tol: float = 1e-6) -> Pseudoconfiguration:
    return Pseudoconfiguration(point, point.is_integral(tol))


__all__ = [
    "SignalMap", "Pseudoconfiguration", "CoverConfiguration", "tmv", "pseudodistance", "q_function",
    "pairwise_error_probability", "awgn_pseudoweight", "snap_value", "snap_point", "verify_cover",
    "cover_to_normalized_vector", "cover_to_point", "realize_cover", "point_to_dict", "point_from_dict",
    "save_point", "load_point", "as_pseudoconfiguration",
]
