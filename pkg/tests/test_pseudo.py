import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from scipy.stats import norm

from _graphs import random_graph
from conftest import CODEWORDS, ROOT6
from lpreceiver import (CoverConfiguration, IsiChannel, JointSystem, SignalMap, awgn_pseudoweight, bpsk,
                        hamming_7_4, pairwise_error_probability, pseudodistance, realize_cover, verify_cover)
from lpreceiver.errors import (IdenticalPseudoconfigurationError, MalformedCoverError, NotRealizableError,
                               UnsupportedModeError)
from lpreceiver.factor_graph import enumerate_behavior
from lpreceiver.pseudo import (as_pseudoconfiguration, cover_to_normalized_vector, cover_to_point, load_point,
                               point_from_dict, point_to_dict, save_point, snap_point, tmv)
from lpreceiver.relaxation import PolytopePoint, indicator_point, polytope_violations


def mixture(system, weights):
    """Convex combination of codeword configurations as a polytope point."""
    g = system.base_graph
    pts = [(w, indicator_point(g, system.configuration(c))) for c, w in weights]
    return PolytopePoint({v: sum(w * np.asarray(p.g[v], dtype=float) for w, p in pts) for v in g.var_ids},
                         {f: sum(w * np.asarray(p.p[f], dtype=float) for w, p in pts) for f in g.factor_ids})


# ------------------------------------------------------------------ pseudodistance

@pytest.mark.parametrize("i,t,m,v", [
    (1, [2, -2, -4, -2, 0, 0, 2], [2, -2, -3, -1, 0, 0, 0], [2 / 3, 2 / 3, 5 / 3, 1 / 3, 0, 0, 0]),
    (2, [2, -2, -2, 0, 0, 2, 2], [2, -2 / 3, -2 / 3, 0, 0, 2 / 3, 2], [2 / 3, 2 / 9, 2 / 9, 0, 0, 2 / 9, 2 / 3]),
    (3, [4, 4, 4, 2, 0, 0, -2], [4, 4, 3, 1, 0, 0, 0], [8 / 3, 8 / 3, 5 / 3, 1 / 3, 0, 0, 0]),
    (4, [4, 4, 2, 0, 0, -2, -2], [4, 8 / 3, 2 / 3, 0, 0, -2 / 3, -2], [8 / 3, 4 / 3, 2 / 9, 0, 0, 2 / 9, 2 / 3]),
])
def test_printed_t_m_v(system, kappas, codeword_configs, i, t, m, v):
    got_t, got_m, got_v = tmv(codeword_configs[i], kappas[i], system.signal_map)
    assert np.allclose(got_t * ROOT6, t, atol=1e-12)
    assert np.allclose(got_m * ROOT6, m, atol=1e-12)
    assert np.allclose(got_v, v, atol=1e-12)


@pytest.mark.parametrize("i,expected", [(1, 4 / 3), (2, math.sqrt(2)), (3, 4 / 3), (4, math.sqrt(2))])
def test_reference_pseudodistances(system, kappas, codeword_configs, i, expected):
    for mode in ("real", "complex"):
        assert pseudodistance(codeword_configs[i], kappas[i], system.signal_map, mode) == pytest.approx(
            expected, abs=1e-12)


def test_codeword_pair_is_euclidean(system, codeword_configs):
    smap = system.signal_map
    for a, b in ((1, 2), (3, 4)):
        _, ya = system.simulate(CODEWORDS[a])
        _, yb = system.simulate(CODEWORDS[b])
        d = pseudodistance(codeword_configs[a], codeword_configs[b], smap)
        assert d == pytest.approx(math.sqrt(2), abs=1e-12)
        assert d == pytest.approx(np.linalg.norm(ya - yb), abs=1e-12)


def test_reduction_for_all_codeword_pairs(system):
    smap = system.signal_map
    book = system.code.codebook()
    for a in book:
        xa = system.configuration(a)
        _, ya = system.simulate(a)
        for b in book:
            if np.array_equal(a, b):
                continue
            _, yb = system.simulate(b)
            point = indicator_point(system.base_graph, system.configuration(b))
            for mode in ("real", "complex"):
                assert pseudodistance(xa, point, smap, mode) == pytest.approx(np.linalg.norm(ya - yb), abs=1e-9)


def test_real_and_complex_modes_agree(system):
    rng = np.random.default_rng(0)
    book = system.code.codebook()
    for _ in range(1000):
        picks = rng.choice(len(book), size=3, replace=False)
        w = rng.dirichlet(np.ones(3))
        point = mixture(system, [(book[k], wk) for k, wk in zip(picks, w)])
        x = system.configuration(book[rng.integers(len(book))])
        try:
            real = pseudodistance(x, point, system.signal_map, "real")
        except IdenticalPseudoconfigurationError:
            continue
        assert pseudodistance(x, point, system.signal_map, "complex") == pytest.approx(real, rel=1e-12)


def test_complex_signal_map():
    smap = SignalMap.from_dict({"a": {0: 1 + 1j, 1: -1 - 1j}, "b": {0: 1j, 1: -1j}})
    x, z = {"a": 0, "b": 0}, {"a": 1, "b": 1}
    expected = math.sqrt(abs((1 + 1j) - (-1 - 1j)) ** 2 + abs(2j) ** 2)
    assert pseudodistance(x, z, smap, "complex") == pytest.approx(expected)
    with pytest.raises(UnsupportedModeError):
        pseudodistance(x, z, smap, "real")


def test_identical_point_rejected(system, codeword_configs):
    point = indicator_point(system.base_graph, codeword_configs[1])
    with pytest.raises(IdenticalPseudoconfigurationError):
        pseudodistance(codeword_configs[1], point, system.signal_map)


def test_pseudodistance_ignores_observation_weights(system, kappas, codeword_configs):
    other = JointSystem.get(system.code, system.channel.with_sigma(0.9), system.modulation)
    a = pseudodistance(codeword_configs[1], kappas[1], system.signal_map)
    b = pseudodistance(codeword_configs[1], kappas[1], other.signal_map)
    assert a == b


# ------------------------------------------------------------------ pairwise error probability

def test_pairwise_error_probability():
    assert pairwise_error_probability(0.0, 1.0) == 0.5
    assert pairwise_error_probability(4 / 3, 1 / 3) == pytest.approx(norm.sf(2.0), rel=1e-14)
    assert pairwise_error_probability(4 / 3, 1 / 3) == pytest.approx(0.0227501, abs=1e-7)
    assert pairwise_error_probability(math.sqrt(2), 1 / math.sqrt(2)) == pytest.approx(0.1586553, abs=1e-7)
    with pytest.raises(ValueError):
        pairwise_error_probability(1.0, 0.0)


# ------------------------------------------------------------------ covers

def test_integral_point_gives_degree_one_cover(system, codeword_configs):
    g = system.base_graph
    cover = realize_cover(indicator_point(g, codeword_configs[2]), g)
    assert cover.degree == 1
    assert all(perm == (0,) for perm in cover.permutations.values())
    assert verify_cover(cover, g)


@pytest.mark.parametrize("i,degree", [(2, 3), (4, 3)])
def test_thirds_points_realize_at_degree_three(system, kappas, i, degree):
    g = system.base_graph
    cover = realize_cover(kappas[i], g)
    assert cover.degree == degree and verify_cover(cover, g)
    gbar = cover_to_normalized_vector(cover, g)
    assert all(gbar[v].tolist() == kappas[i].g[v].tolist() for v in g.var_ids)


@pytest.mark.parametrize("i", [1, 3])
def test_halves_points_realize(system, kappas, i):
    g = system.base_graph
    cover = realize_cover(kappas[i], g)
    assert verify_cover(cover, g)
    gbar = cover_to_normalized_vector(cover, g)
    assert all(gbar[v].tolist() == kappas[i].g[v].tolist() for v in g.var_ids)
    assert polytope_violations(g, cover_to_point(cover, g), tol=0) == []


def test_broken_permutation_fails_verification(system, kappas):
    g = system.base_graph
    cover = realize_cover(kappas[2], g)
    perms = dict(cover.permutations)
    broken = None
    for (fid, v), perm in perms.items():
        if not fid.startswith("chi"):
            continue
        for a in range(cover.degree):
            for b in range(a + 1, cover.degree):
                if cover.assignments[v][perm[a]] != cover.assignments[v][perm[b]]:
                    p = list(perm)
                    p[a], p[b] = p[b], p[a]
                    broken = {**perms, (fid, v): tuple(p)}
                    break
            if broken:
                break
        if broken:
            break
    bad = CoverConfiguration(cover.degree, cover.assignments, broken)
    assert not verify_cover(bad, g)


def test_malformed_cover(system, codeword_configs):
    g = system.base_graph
    cover = realize_cover(indicator_point(g, codeword_configs[1]), g)
    with pytest.raises(MalformedCoverError):
        verify_cover(CoverConfiguration(2, cover.assignments, cover.permutations), g)
    perms = dict(cover.permutations)
    perms[next(iter(perms))] = (5,)
    with pytest.raises(MalformedCoverError):
        verify_cover(CoverConfiguration(1, cover.assignments, perms), g)


def test_random_covers_lie_in_polytope():
    rng = np.random.default_rng(11)
    for _ in range(100):
        g = random_graph(rng)
        configs = list(enumerate_behavior(g))
        M = int(rng.integers(1, 5))
        layers = [configs[k] for k in rng.integers(len(configs), size=M)]
        relabel = {v: rng.permutation(M) for v in g.var_ids}
        assignments = {v: [None] * M for v in g.var_ids}
        for m, x in enumerate(layers):
            for v in g.var_ids:
                assignments[v][relabel[v][m]] = x[v]
        perms = {(f, v): tuple(int(relabel[v][m]) for m in range(M)) for f in g.factor_ids
                 for v in g.factors[f].scope}
        cover = CoverConfiguration(M, {v: tuple(a) for v, a in assignments.items()}, perms)
        assert verify_cover(cover, g)
        point = cover_to_point(cover, g)
        assert polytope_violations(g, point, tol=0) == []
        # and back again
        again = realize_cover(point, g)
        assert verify_cover(again, g)
        assert all(cover_to_normalized_vector(again, g)[v].tolist() == point.g[v].tolist() for v in g.var_ids)


def test_irrational_point_not_realizable(system, codeword_configs):
    g = system.base_graph
    r = 1 / math.sqrt(2)
    point = mixture(system, [(CODEWORDS[1], r), (CODEWORDS[2], 1 - r)])
    with pytest.raises(NotRealizableError):
        realize_cover(point, g)
    assert snap_point(mixture(system, [(CODEWORDS[1], 0.25), (CODEWORDS[2], 0.75)]), g).g["c3"][1] == Fraction(1, 4)


# ------------------------------------------------------------------ AWGN pseudoweight

def test_pseudoweight_reduction_symbolic():
    n = 5
    w = sympy.symbols(f"w0:{n}", positive=True)
    # all-zero codeword under BPSK: t = +1, and E s = 1 - 2 w, E s^2 = 1 at each position
    t = [1] * n
    m = [1 - 2 * wi for wi in w]
    v = [1] * n
    num = sum(ti**2 + vi - 2 * ti * mi for ti, mi, vi in zip(t, m, v))
    den2 = sum((mi - ti) ** 2 for ti, mi in zip(t, m))
    d2_over_4 = num**2 / den2 / 4
    target = sum(w) ** 2 / sum(wi**2 for wi in w)
    assert sympy.simplify(d2_over_4 - target) == 0


def memoryless():
    return JointSystem.get(hamming_7_4(), IsiChannel(np.array([1.0])), bpsk())


def test_pseudoweight_of_codewords_is_hamming_weight():
    system = memoryless()
    g = system.base_graph
    cvars = [f"c{i}" for i in range(1, 8)]
    for c in system.code.codebook():
        if c.sum() == 0:
            continue
        point = indicator_point(g, system.configuration(c))
        assert awgn_pseudoweight(point, g, cvars) == pytest.approx(c.sum())


def test_pseudoweight_half_vector():
    system = memoryless()
    g = system.base_graph
    half = PolytopePoint({f"c{i}": np.array([0.5, 0.5]) for i in range(1, 8)}, {})
    omega = [Fraction(1, 2)] * 7
    closed_form = sum(omega) ** 2 / sum(w * w for w in omega)
    assert closed_form == 7
    assert awgn_pseudoweight(half, g, [f"c{i}" for i in range(1, 8)]) == pytest.approx(float(closed_form))


def test_pseudoweight_matches_pseudodistance_at_memory_zero():
    system = memoryless()
    g = system.base_graph
    rng = np.random.default_rng(6)
    book = system.code.codebook()
    zero = system.configuration([0] * 7)
    for _ in range(200):
        picks = rng.choice(len(book), size=3, replace=False)
        w = rng.dirichlet(np.ones(3))
        point = mixture(system, [(book[k], wk) for k, wk in zip(picks, w)])
        try:
            d = pseudodistance(zero, point, system.signal_map)
        except IdenticalPseudoconfigurationError:
            continue
        assert awgn_pseudoweight(point, g, [f"c{i}" for i in range(1, 8)]) == pytest.approx(d * d / 4, rel=1e-9)


def test_pseudoweight_requires_memoryless(system, kappas):
    with pytest.raises(UnsupportedModeError):
        awgn_pseudoweight(kappas[1], system.base_graph, ["c1"], memory=2)


# ------------------------------------------------------------------ dump format

def test_point_dump_round_trip(tmp_path, system, kappas):
    path = tmp_path / "k2.json"
    save_point(kappas[2], path, system.base_graph)
    back = load_point(path)
    for v in system.base_graph.var_ids:
        assert back.g[v].tolist() == kappas[2].g[v].tolist()
    doc = point_to_dict(kappas[2])
    assert doc["g"]["d2"]["exact"][system.trellis.edge_index[(0, 1, 0)]] == "2/3"
    assert point_from_dict(doc).p["T2"].tolist() == kappas[2].p["T2"].tolist()
    assert not as_pseudoconfiguration(kappas[2]).is_configuration
