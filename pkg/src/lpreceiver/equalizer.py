"""Joint equalization and decoding of linearly coded transmissions over an ISI channel.

The channel has memory L and taps h_0..h_L (optionally varying with time);
inputs before time 1 are the ring zero, the initial state is therefore known
and the final state is not.  The system factor graph has variables

* ``c1..cn``  coded symbols,
* ``s0..sn``  channel states (tuples of L ring symbols, omitted when L = 0),
* ``d1..dn``  trellis edges ``(c_i, c_{i-1}, ..., c_{i-L})``, the observed set,

and indicator factors ``nu`` (known initial state), ``chi<j>`` (parity
checks, 1-based) and ``T<i>`` (trellis consistency).
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Mapping, Sequence

import numpy as np

from .codes import LinearCode
from .errors import UnsupportedModeError
from .factor_graph import Factor, FactorGraph
from .lp import LinearProgram, LPBuilder
from .pseudo import SignalMap
from .relaxation import PolytopePoint, complete_factor, extract_output, factor_marginal

PROAKIS_B = (1 / math.sqrt(6), 2 / math.sqrt(6), 1 / math.sqrt(6))
CHANNEL_PRESETS = {"proakis-b": PROAKIS_B, "awgn": (1.0,)}


@dataclass(frozen=True, eq=False)
class Modulation:
    """Memoryless symbol mapper X: ring symbol -> constellation point."""

    points: tuple

    def __post_init__(self):
        pts = tuple(complex(p) if isinstance(p, complex) else float(p) for p in self.points)
        if len(set(pts)) != len(pts):
            raise ValueError("modulation mapping must be injective")
        object.__setattr__(self, "points", pts)

    @property
    def q(self) -> int:
        return len(self.points)

    @property
    def is_real(self) -> bool:
        return all(not isinstance(p, complex) or p.imag == 0 for p in self.points)

    def __call__(self, symbols) -> np.ndarray:
        return np.asarray(self.points)[np.asarray(symbols, dtype=np.int64)]


def bpsk() -> Modulation:
    """0 -> +1, 1 -> -1."""
    return Modulation((1.0, -1.0))


@dataclass(frozen=True, eq=False)
class IsiChannel:
    """Tapped delay line with additive white Gaussian noise.

    ``taps`` has shape (L+1,) for a static channel or (n, L+1) for one tap set
    per time index.  ``sigma`` is the noise standard deviation per real
    dimension; ``complex_noise`` draws circular complex noise instead of real.
    """

    taps: np.ndarray
    sigma: float = 0.0
    complex_noise: bool = False
    name: str = ""

    def __post_init__(self):
        taps = np.asarray(self.taps)
        if taps.ndim not in (1, 2) or taps.shape[-1] < 1:
            raise ValueError("taps must have shape (L+1,) or (n, L+1)")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        object.__setattr__(self, "taps", taps)

    @property
    def memory(self) -> int:
        return self.taps.shape[-1] - 1

    def taps_at(self, i: int) -> np.ndarray:
        """Taps used at (0-based) time index i."""
        return self.taps if self.taps.ndim == 1 else self.taps[i]

    def with_sigma(self, sigma: float) -> "IsiChannel":
        return IsiChannel(self.taps, sigma, self.complex_noise, self.name)


def proakis_b(sigma: float = 0.0) -> IsiChannel:
    return IsiChannel(np.array(PROAKIS_B), sigma, name="proakis-b")


def channel_from_spec(spec, sigma: float = 0.0) -> IsiChannel:
    """A preset name or an explicit tap list."""
    if isinstance(spec, str):
        return IsiChannel(np.array(CHANNEL_PRESETS[spec]), sigma, name=spec)
    return IsiChannel(np.asarray(spec, dtype=complex if any(isinstance(t, complex) for t in spec) else float),
                      sigma)


@dataclass(frozen=True)
class Trellis:
    """Edge set D = R^(L+1) with d = (d_0, ..., d_L), d_0 the current input."""

    q: int
    memory: int

    @cached_property
    def edges(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product(range(self.q), repeat=self.memory + 1))

    @cached_property
    def states(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product(range(self.q), repeat=self.memory))

    @cached_property
    def edge_index(self) -> dict:
        return {d: k for k, d in enumerate(self.edges)}

    @staticmethod
    def ip(d) -> int:
        return d[0]

    @staticmethod
    def s_start(d) -> tuple:
        return tuple(d[1:])

    @staticmethod
    def s_end(d) -> tuple:
        return tuple(d[:-1])

    def output(self, d, taps, modulation: Modulation):
        """Noiseless channel output sum_t h_t X(d_t) for one edge."""
        return sum(h * modulation.points[s] for h, s in zip(taps, d))

    def path(self, c) -> list[tuple[int, ...]]:
        """Edges d_1..d_n followed by a codeword from the zero state."""
        padded = [0] * self.memory + [int(v) for v in c]
        return [tuple(padded[i + self.memory - t] for t in range(self.memory + 1)) for i in range(len(c))]


def snr_to_sigma(eb_n0_db: float, code_rate: float, mode: str = "real", bits_per_symbol: int = 1) -> float:
    """Noise std per real dimension for unit-energy symbols and a unit-gain channel.

    sigma^2 = 1 / (2 R b 10^(Eb/N0 / 10)), with b coded bits per symbol.
    """
    if not 0 < code_rate <= 1:
        raise ValueError("code rate must lie in (0, 1]")
    if mode not in ("real", "complex"):
        raise ValueError(f"unknown noise mode {mode!r}")
    if math.isinf(eb_n0_db) and eb_n0_db > 0:
        return 0.0
    return math.sqrt(1.0 / (2.0 * code_rate * bits_per_symbol * 10.0 ** (eb_n0_db / 10.0)))


# ---------------------------------------------------------------------- system


class JointSystem:
    """Code, channel and modulation with the structures shared by every trial."""

    def __init__(self, code: LinearCode, channel: IsiChannel, modulation: Modulation):
        if modulation.q != code.q:
            raise ValueError("modulation alphabet size must equal the ring size")
        if channel.taps.ndim == 2 and channel.taps.shape[0] != code.n:
            raise ValueError("time-varying taps need one row per code position")
        self.code, self.channel, self.modulation = code, channel, modulation
        self.trellis = Trellis(code.q, channel.memory)
        self.n, self.L, self.q = code.n, channel.memory, code.q

    @classmethod
    @lru_cache(maxsize=32)
    def get(cls, code, channel, modulation) -> "JointSystem":
        return cls(code, channel, modulation)

    # -- naming
    @staticmethod
    def c(i): return f"c{i}"
    @staticmethod
    def s(i): return f"s{i}"
    @staticmethod
    def d(i): return f"d{i}"
    @staticmethod
    def chi(j): return f"chi{j + 1}"
    @staticmethod
    def T(i): return f"T{i}"

    @cached_property
    def outputs(self) -> np.ndarray:
        """op_i(d) for i = 1..n (row i-1) and every edge."""
        tr = self.trellis
        dtype = complex if (not self.modulation.is_real or np.iscomplexobj(self.channel.taps)) else float
        out = np.zeros((self.n, len(tr.edges)), dtype=dtype)
        for i in range(self.n):
            taps = self.channel.taps_at(i)
            for k, d in enumerate(tr.edges):
                out[i, k] = tr.output(d, taps, self.modulation)
        return out

    def distances(self, y) -> np.ndarray:
        """|y_i - op_i(d)|^2 for every position and edge."""
        y = np.asarray(y)
        return np.abs(y[:, None] - self.outputs) ** 2

    def cost_scale(self) -> float:
        s = self.channel.sigma
        return 1.0 / (2.0 * s * s) if s > 0 else 1.0

    def edge_costs(self, y) -> np.ndarray:
        """lambda-tilde_i(d) = scale * (|y_i - op_i(0)|^2 - |y_i - op_i(d)|^2)."""
        dist = self.distances(y)
        return self.cost_scale() * (dist[:, :1] - dist)

    # -- factor graph
    @cached_property
    def base_graph(self) -> FactorGraph:
        return self._graph(None)

    def _graph(self, observations) -> FactorGraph:
        tr, n, L, q = self.trellis, self.n, self.L, self.q
        variables = {self.c(i): tuple(range(q)) for i in range(1, n + 1)}
        if L > 0:
            variables.update({self.s(i): tr.states for i in range(n + 1)})
        variables.update({self.d(i): tr.edges for i in range(1, n + 1)})
        factors = {}
        if L > 0:
            factors["nu"] = Factor((self.s(0),), ((tr.states[0],),))
        for j in self.code.checks:
            scope = tuple(self.c(i + 1) for i in self.code.supports[j])
            factors[self.chi(j)] = Factor(scope, self.code.local_codes[j])
        for i in range(1, n + 1):
            if L > 0:
                scope = (self.c(i), self.d(i), self.s(i - 1), self.s(i))
                rows = tuple((tr.ip(d), d, tr.s_start(d), tr.s_end(d)) for d in tr.edges)
            else:
                scope = (self.c(i), self.d(i))
                rows = tuple((tr.ip(d), d) for d in tr.edges)
            factors[self.T(i)] = Factor(scope, rows)
        if observations is None:
            observations = {self.d(i): {d: 1.0 for d in tr.edges} for i in range(1, n + 1)}
        return FactorGraph(variables, factors, observations)

    def observation_weights(self, y) -> dict:
        """Gaussian likelihoods of every edge, each divided by its per-position maximum."""
        dist = self.distances(y)
        scale = self.cost_scale()
        rel = np.exp(-scale * (dist - dist.min(axis=1, keepdims=True)))
        rel = np.maximum(rel, np.finfo(float).tiny)
        return {self.d(i + 1): dict(zip(self.trellis.edges, map(float, rel[i]))) for i in range(self.n)}

    def graph(self, y=None) -> FactorGraph:
        return self.base_graph if y is None else self._graph(self.observation_weights(y))

    def configuration(self, c) -> dict:
        """Full system configuration (c, s, d) induced by a codeword."""
        tr = self.trellis
        c = [int(v) for v in c]
        edges = tr.path(c)
        x = {self.c(i + 1): c[i] for i in range(self.n)}
        if self.L > 0:
            x[self.s(0)] = tr.states[0]
            for i in range(1, self.n + 1):
                x[self.s(i)] = tr.s_end(edges[i - 1])
        for i in range(1, self.n + 1):
            x[self.d(i)] = edges[i - 1]
        return {v: x[v] for v in self.base_graph.var_ids}

    def codeword_of(self, x: Mapping) -> np.ndarray:
        return np.array([x[self.c(i)] for i in range(1, self.n + 1)], dtype=np.int64)

    @cached_property
    def signal_map(self) -> SignalMap:
        """Noiseless output per observed edge variable, for pseudodistance."""
        return SignalMap({self.d(i + 1): self.trellis.edges for i in range(self.n)},
                         {self.d(i + 1): self.outputs[i].copy() for i in range(self.n)})

    def point_from_edges(self, q) -> PolytopePoint:
        """Full polytope point from per-position edge distributions.

        ``q`` maps a 1-based position to {edge: weight}; edges may be tuples
        or digit strings such as "100" (d_0 d_1 ... d_L).  Entries may be
        Fractions, in which case the point is exact.  Parity-check
        distributions are completed from the induced symbol marginals.
        """
        tr, graph = self.trellis, self.base_graph
        exact = any(isinstance(w, Fraction) for dist in q.values() for w in dist.values())
        zero = Fraction(0) if exact else 0.0

        def vec(n):
            return np.array([zero] * n, dtype=object if exact else float)

        p = {}
        for i in range(1, self.n + 1):
            arr = vec(len(tr.edges))
            for d, w in q.get(i, {}).items():
                key = tuple(int(ch) for ch in d) if isinstance(d, str) else tuple(d)
                arr[tr.edge_index[key]] = Fraction(w) if exact else float(w)
            p[self.T(i)] = arr
        if self.L > 0:
            p["nu"] = vec(1) + 1
        g = {}
        for i in range(1, self.n + 1):
            t = self.T(i)
            g[self.c(i)] = factor_marginal(graph, t, self.c(i), p[t])
            g[self.d(i)] = p[t].copy()
            if self.L > 0:
                g[self.s(i)] = factor_marginal(graph, t, self.s(i), p[t])
                if i == 1:
                    g[self.s(0)] = factor_marginal(graph, t, self.s(0), p[t])
        M = 1
        if exact:
            for arr in p.values():
                for w in arr:
                    M = math.lcm(M, w.denominator)
        for j in self.code.checks:
            fid = self.chi(j)
            dist = _integer_completion(graph, fid, g, M) if exact else None
            if dist is None:
                dist = complete_factor(graph, fid, {v: np.asarray(g[v], dtype=float)
                                                    for v in graph.factors[fid].scope})
                if exact:
                    dist = np.array([Fraction(float(x)).limit_denominator(10**4) for x in dist], dtype=object)
            p[fid] = dist
        return PolytopePoint(g, p)

    # -- LP4 / LP5
    def _trellis_constraints(self, b: LPBuilder, qcol):
        tr, n = self.trellis, self.n
        for i in range(1, n + 1):
            b.equality({qcol[(i, k)]: 1.0 for k in range(len(tr.edges))}, 1.0, ("sum_q", i))
        nonzero_states = tr.states[1:]
        for i in range(1, n):
            for s in nonzero_states:
                coefs = {}
                for k, d in enumerate(tr.edges):
                    if tr.s_end(d) == s:
                        coefs[qcol[(i, k)]] = coefs.get(qcol[(i, k)], 0.0) + 1.0
                    if tr.s_start(d) == s:
                        coefs[qcol[(i + 1, k)]] = coefs.get(qcol[(i + 1, k)], 0.0) - 1.0
                b.equality(coefs, 0.0, ("chain", i, s))
        for s in nonzero_states:
            b.equality({qcol[(1, k)]: 1.0 for k, d in enumerate(tr.edges) if tr.s_start(d) == s}, 0.0,
                       ("init", s))

    def _q_columns(self, b: LPBuilder):
        return {(i, k): b.column(("p", self.T(i), k)) for i in range(1, self.n + 1)
                for k in range(len(self.trellis.edges))}

    @cached_property
    def lp4_template(self) -> LinearProgram:
        tr, code = self.trellis, self.code
        b = LPBuilder()
        wcol = {(j, k): b.column(("p", self.chi(j), k))
                for j in code.checks for k in range(len(code.local_codes[j]))}
        qcol = self._q_columns(b)
        for j in code.checks:
            b.equality({wcol[(j, k)]: 1.0 for k in range(len(code.local_codes[j]))}, 1.0, ("sum_w", j))
        self._trellis_constraints(b, qcol)
        for j in code.checks:
            U = code.supports[j]
            for pos, i in enumerate(U):
                for r in range(1, self.q):
                    coefs = {qcol[(i + 1, k)]: 1.0 for k, d in enumerate(tr.edges) if tr.ip(d) == r}
                    for k, row in enumerate(code.local_codes[j]):
                        if row[pos] == r:
                            coefs[wcol[(j, k)]] = -1.0
                    b.equality(coefs, 0.0, ("tie", j, i + 1, r))
        return b.build(sense="max", kind="lp4")

    @cached_property
    def lp5_template(self) -> LinearProgram:
        if self.q != 2 or self.modulation.q != 2:
            raise UnsupportedModeError("the parity-polytope receiver needs binary coding and modulation")
        tr, code = self.trellis, self.code
        b = LPBuilder()
        qcol = self._q_columns(b)
        fcol = {i: b.column(("f", self.c(i)), upper=1.0) for i in range(1, self.n + 1)}
        self._trellis_constraints(b, qcol)
        for i in range(1, self.n + 1):
            coefs = {qcol[(i, k)]: 1.0 for k, d in enumerate(tr.edges) if tr.ip(d) == 1}
            coefs[fcol[i]] = -1.0
            b.equality(coefs, 0.0, ("f", i))
        for j in code.checks:
            U = code.supports[j]
            for size in range(1, len(U) + 1, 2):
                for F in itertools.combinations(U, size):
                    coefs = {fcol[i + 1]: (1.0 if i in F else -1.0) for i in U}
                    b.inequality(coefs, len(F) - 1.0, ("odd", j, F))
        return b.build(sense="max", kind="lp5")

    def objective_for(self, template: LinearProgram, y) -> np.ndarray:
        lam = self.edge_costs(y)
        c = np.zeros(template.n_columns)
        n_edges = len(self.trellis.edges)
        for k, lab in enumerate(template.column_labels):
            if lab[0] == "p" and lab[1].startswith("T"):
                i = int(lab[1][1:])
                c[k] = lam[i - 1, lab[2]]
        assert n_edges == lam.shape[1]
        return c

    @cached_property
    def _t_columns(self):
        """Positions of q-columns in each template, for fast objective updates."""
        out = {}
        for name in ("lp4", "lp5"):
            tmpl = getattr(self, f"{name}_template") if name == "lp4" or self.q == 2 else None
            if tmpl is None:
                continue
            cols, rows, edges = [], [], []
            for k, lab in enumerate(tmpl.column_labels):
                if lab[0] == "p" and lab[1].startswith("T"):
                    cols.append(k)
                    rows.append(int(lab[1][1:]) - 1)
                    edges.append(lab[2])
            out[name] = (np.array(cols), np.array(rows), np.array(edges))
        return out

    def lp(self, kind: str, y) -> LinearProgram:
        tmpl = self.lp4_template if kind == "lp4" else self.lp5_template
        cols, rows, edges = self._t_columns[kind]
        c = np.zeros(tmpl.n_columns)
        c[cols] = self.edge_costs(y)[rows, edges]
        return tmpl.with_objective(c)

    def decode(self, kind: str, lp: LinearProgram, result, tolerance: float = 1e-6):
        """Receiver output of a solved LP4/LP5: a configuration or a ReceiverFailure.

        Integral vertices are read straight off the trellis columns; anything
        else goes through the generic point reconstruction.  Both routes give
        the same answer on integral vertices.
        """
        x = result.primal
        if result.status == "optimal" and np.all(np.minimum(np.abs(x), np.abs(x - 1.0)) <= tolerance):
            cols, rows, edges = self._t_columns[kind]
            picked = cols[x[cols] > 0.5]
            if len(picked) == self.n:
                k = np.searchsorted(cols, picked)
                order = np.argsort(rows[k])
                chosen = [self.trellis.edges[e] for e in edges[k][order]]
                c = np.array([d[0] for d in chosen], dtype=np.int64)
                if self.trellis.path(c) == chosen and self.code.is_codeword(c):
                    return self.configuration(c)
        return extract_output(result, lp, self.base_graph, tolerance)

    # -- channel and ML oracle
    def simulate(self, codeword_or_info, rng_seed=None, rng: np.random.Generator | None = None):
        """Transmit a codeword (or encode information symbols first).  Returns (x, y)."""
        word = np.asarray(codeword_or_info, dtype=np.int64)
        if word.shape == (self.n,):
            c = word
        else:
            c = self.code.encode(word)
        if not self.code.is_codeword(c):
            raise ValueError("transmitted word is not a codeword")
        edges = self.trellis.path(c)
        y = np.array([self.outputs[i, self.trellis.edge_index[edges[i]]] for i in range(self.n)])
        sigma = self.channel.sigma
        if sigma > 0:
            rng = rng if rng is not None else np.random.default_rng(rng_seed)
            noise = rng.normal(0.0, sigma, self.n)
            if self.channel.complex_noise:
                y = y.astype(complex) + noise + 1j * rng.normal(0.0, sigma, self.n)
            else:
                y = y + noise
        return self.configuration(c), y

    @cached_property
    def codebook(self) -> np.ndarray:
        return self.code.codebook()

    @cached_property
    def codebook_edges(self) -> np.ndarray:
        """Edge index of every codeword at every position, shape (|C|, n)."""
        idx = self.trellis.edge_index
        return np.array([[idx[d] for d in self.trellis.path(c)] for c in self.codebook], dtype=np.int64)

    def brute_force(self, y) -> "BruteForceResult":
        dist = self.distances(y)
        metric = dist[np.arange(self.n)[None, :], self.codebook_edges].sum(axis=1)
        best = float(metric.min())
        winners = np.flatnonzero(metric <= best + 1e-12 * (1.0 + best))
        # codebook is lexicographically sorted, so the first winner is canonical
        c = self.codebook[winners[0]]
        return BruteForceResult(self.configuration(c), c, best, len(winners) > 1)


def _integer_completion(graph: FactorGraph, fid: str, g, M: int, max_nodes: int = 200_000):
    """Distribution on a factor's rows with entries in (1/M)Z matching exact marginals, or None."""
    rows = graph.rows[fid]
    scope = graph.factors[fid].scope
    need = []
    for v in scope:
        counts = [x * M for x in g[v]]
        if any(c.denominator != 1 for c in counts):
            return None
        need.append([int(c) for c in counts])
    counts = [0] * len(rows)
    budget = [max_nodes]

    def rec(k, left):
        budget[0] -= 1
        if budget[0] < 0:
            return False
        if k == len(rows):
            return left == 0 and all(c == 0 for nv in need for c in nv)
        cap = min([left] + [need[pos][rows[k, pos]] for pos in range(len(scope))])
        for c in range(cap, -1, -1):
            for pos in range(len(scope)):
                need[pos][rows[k, pos]] -= c
            counts[k] = c
            if rec(k + 1, left - c):
                return True
            for pos in range(len(scope)):
                need[pos][rows[k, pos]] += c
        counts[k] = 0
        return False

    if not rec(0, M):
        return None
    return np.array([Fraction(c, M) for c in counts], dtype=object)


@dataclass(frozen=True)
class BruteForceResult:
    configuration: dict
    codeword: np.ndarray
    metric: float  # sum of squared distances; smaller is more likely
    tied: bool


# -------------------------------------------------------------- module-level API


def build_system_graph(code: LinearCode, channel: IsiChannel, modulation: Modulation, y=None) -> FactorGraph:
    """System factor graph; observation factors come from ``y`` when given."""
    return JointSystem.get(code, channel, modulation).graph(y)


def build_lp4(code, channel, modulation, y) -> LinearProgram:
    """Joint equalization/decoding LP over local-codeword and trellis-edge distributions."""
    if len(y) != code.n:
        raise ValueError("received vector length must equal the block length")
    return JointSystem.get(code, channel, modulation).lp("lp4", y)


def build_lp5(code, channel, modulation, y) -> LinearProgram:
    """Binary variant with parity-polytope (odd-set) inequalities instead of local codewords."""
    if code.q != 2:
        raise UnsupportedModeError("the parity-polytope receiver needs a binary code")
    if len(y) != code.n:
        raise ValueError("received vector length must equal the block length")
    return JointSystem.get(code, channel, modulation).lp("lp5", y)


def simulate_channel(code, channel, modulation, info_or_codeword, rng_seed=None):
    return JointSystem.get(code, channel, modulation).simulate(info_or_codeword, rng_seed)


def brute_force_map(code, channel, modulation, y) -> BruteForceResult:
    """Exact ML codeword by pricing the whole codebook."""
    return JointSystem.get(code, channel, modulation).brute_force(y)


def time_varying(taps: Sequence[Sequence[complex]], sigma: float = 0.0) -> IsiChannel:
    return IsiChannel(np.asarray(taps), sigma)


SYSTEM_FORMAT = "lpreceiver-system/1"
EDGES_FORMAT = "lpreceiver-edge-distribution/1"


def system_from_dict(doc) -> JointSystem:
    """{"format", "code", "channel", "modulation"}; code and channel accept presets."""
    from .codes import load_code
    doc = dict(doc)
    fmt = doc.pop("format", SYSTEM_FORMAT)
    if fmt != SYSTEM_FORMAT:
        raise ValueError(f"expected format {SYSTEM_FORMAT!r}")
    unknown = set(doc) - {"code", "channel", "modulation"}
    if unknown:
        raise ValueError(f"unknown system fields {sorted(unknown)}")
    if doc.get("modulation", "bpsk") != "bpsk":
        raise UnsupportedModeError("only bpsk modulation is available from system files")
    return JointSystem(load_code(doc.get("code", "hamming-7-4")), channel_from_spec(doc.get("channel", "proakis-b")),
                       bpsk())


def load_system(path) -> JointSystem:
    import json
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def edges_from_dict(doc) -> dict:
    """Edge-distribution document -> {position: {edge string: Fraction}}."""
    if doc.get("format") != EDGES_FORMAT:
        raise ValueError(f"expected format {EDGES_FORMAT!r}")
    return {int(i): {d: Fraction(w) for d, w in dist.items()} for i, dist in doc["q"].items()}
