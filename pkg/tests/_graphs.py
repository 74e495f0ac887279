"""Random small factor graphs for property tests."""

import itertools

import numpy as np
import pytest

from lpreceiver import ReceiverFailure, map_v, map_v_inverse, solve_lp1, solve_relaxation
from lpreceiver.factor_graph import FactorGraph, check_injectivity
from lpreceiver.relaxation import anchor_constant, default_anchors, lp2_cost


def random_graph(rng: np.random.Generator, max_vars: int = 6, max_q: int = 3, weight_scale: float = 1.5):
    """Random well-posed graph: nonempty behavior, every variable in a factor, injective on Y.

    A planted configuration is kept in every local behavior so the global
    behavior is never empty.  Observation weights are log-normal.
    """
    n = int(rng.integers(2, max_vars + 1))
    ids = [f"x{i}" for i in range(n)]
    alph = {v: tuple(range(int(rng.integers(2, max_q + 1)))) for v in ids}
    planted = {v: int(rng.integers(len(alph[v]))) for v in ids}

    def make_factor(scope):
        full = list(itertools.product(*[alph[v] for v in scope]))
        rows = [r for r in full if rng.random() < 0.5]
        base = tuple(planted[v] for v in scope)
        if base not in rows:
            rows.append(base)
        return scope, rows

    factors = {}
    for j in range(int(rng.integers(1, 5))):
        k = int(rng.integers(1, min(3, n) + 1))
        picked = set(rng.choice(ids, size=k, replace=False).tolist())
        factors[f"f{j}"] = make_factor(tuple(v for v in ids if v in picked))
    covered = {v for scope, _ in factors.values() for v in scope}
    for v in ids:
        if v not in covered:
            other = ids[(ids.index(v) + 1) % n]
            factors[f"f{len(factors)}"] = make_factor(tuple(sorted((v, other), key=ids.index)))
    observed = [v for v in ids if rng.random() < 0.5] or [ids[0]]

    def weights(v):
        return {s: float(np.exp(rng.normal(0.0, weight_scale))) for s in alph[v]}

    graph = FactorGraph(alph, factors, {v: weights(v) for v in observed})
    hidden = [v for v in ids if v not in observed]
    while not check_injectivity(graph):
        observed.append(hidden.pop(int(rng.integers(len(hidden)))))
        graph = FactorGraph(alph, factors, {v: weights(v) for v in observed})
    return graph


def check_equivalence(graph, anchors=None):
    """LP2 and LP3 agree on outcome and value; integral outcomes are ML."""
    anchors = anchors or default_anchors(graph)
    o2, _, r2 = solve_relaxation(graph, "lp2")
    o3, lp3, r3 = solve_relaxation(graph, "lp3", anchors)
    assert r2.status == r3.status == "optimal"
    assert r2.objective_value - r3.objective_value == pytest.approx(anchor_constant(graph, anchors), abs=1e-7)
    f2, f3 = isinstance(o2, ReceiverFailure), isinstance(o3, ReceiverFailure)
    assert f2 == f3
    if not f2:
        assert o2 == o3 == solve_lp1(graph).configuration
    else:
        # both failures: the V-image of the LP3 point is an optimal point of LP2
        gt, p = map_v_inverse(o3.point, graph, anchors, tol=1e-7)
        lifted = map_v(gt, p, graph, anchors, tol=1e-7)
        assert lp2_cost(graph, lifted) == pytest.approx(r2.objective_value, abs=1e-7)
    return o2
