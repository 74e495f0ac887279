"""Factor graphs whose degree>1 factors are indicator functions of local behaviors.

A :class:`FactorGraph` holds finite-alphabet variables, indicator factors
(each an explicit set of allowed local tuples) and positive degree-1
observation factors.  Variables and symbols are kept in declaration order;
that order fixes every vector layout and LP column order downstream.

Symbols are arbitrary hashable values.  In description files they are JSON
scalars or lists; lists are read back as tuples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Hashable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    InstanceTooLargeError,
    MalformedConfigurationError,
    MalformedGraphError,
)

Symbol = Hashable
Configuration = Mapping[str, Symbol]

DEFAULT_ENUMERATION_CAP = 2**20
FILE_FORMAT = "lpreceiver-factor-graph/1"


@dataclass(frozen=True)
class Factor:
    """Indicator factor: 1 on ``behavior`` rows, 0 elsewhere."""

    scope: tuple[str, ...]
    behavior: tuple[tuple[Symbol, ...], ...]


@dataclass(frozen=True)
class ObservationFactor:
    """Degree-1 factor h_i; ``weights[symbol]`` must be strictly positive."""

    weights: Mapping[Symbol, float]

    def __post_init__(self):
        for sym, w in self.weights.items():
            if not (w > 0 and math.isfinite(w)):
                raise MalformedGraphError(f"observation weight for {sym!r} must be positive, got {w}")


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Immutable factor graph.

    ``variables`` maps variable id to its alphabet (ordered symbols).
    ``factors`` maps factor id to :class:`Factor`.  ``observations`` maps an
    observed variable id to its :class:`ObservationFactor`; the keys form Y.
    """

    variables: Mapping[str, tuple[Symbol, ...]]
    factors: Mapping[str, Factor]
    observations: Mapping[str, ObservationFactor] = field(default_factory=dict)

    def __post_init__(self):
        variables = {str(v): tuple(a) for v, a in self.variables.items()}
        factors = {}
        for fid, f in self.factors.items():
            if not isinstance(f, Factor):
                scope, behavior = f
                f = Factor(tuple(scope), tuple(tuple(b) for b in behavior))
            factors[str(fid)] = Factor(tuple(f.scope), tuple(tuple(b) for b in f.behavior))
        observations = {}
        for vid, obs in self.observations.items():
            if not isinstance(obs, ObservationFactor):
                obs = ObservationFactor(dict(obs))
            observations[str(vid)] = obs
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "observations", observations)
        self._validate()

    def _validate(self):
        for vid, alphabet in self.variables.items():
            if len(alphabet) < 2:
                raise MalformedGraphError(f"variable {vid!r} needs at least two symbols")
            if len(set(alphabet)) != len(alphabet):
                raise MalformedGraphError(f"variable {vid!r} has repeated symbols")
        covered = set()
        for fid, f in self.factors.items():
            if not f.scope:
                raise MalformedGraphError(f"factor {fid!r} has empty scope")
            if len(set(f.scope)) != len(f.scope):
                raise MalformedGraphError(f"factor {fid!r} repeats a variable in its scope")
            for vid in f.scope:
                if vid not in self.variables:
                    raise MalformedGraphError(f"factor {fid!r} references unknown variable {vid!r}")
            if not f.behavior:
                raise MalformedGraphError(f"factor {fid!r} has an empty behavior")
            if len(set(f.behavior)) != len(f.behavior):
                raise MalformedGraphError(f"factor {fid!r} has repeated behavior rows")
            for row in f.behavior:
                if len(row) != len(f.scope):
                    raise MalformedGraphError(f"factor {fid!r}: row {row!r} has wrong arity")
                for vid, sym in zip(f.scope, row):
                    if sym not in self.symbol_index[vid]:
                        raise MalformedGraphError(
                            f"factor {fid!r}: symbol {sym!r} not in alphabet of {vid!r}")
            covered.update(f.scope)
        for vid, obs in self.observations.items():
            if vid not in self.variables:
                raise MalformedGraphError(f"observation on unknown variable {vid!r}")
            if set(obs.weights) != set(self.variables[vid]):
                raise MalformedGraphError(f"observation on {vid!r} must weight every symbol exactly once")
        for vid in self.variables:
            if vid not in covered and vid not in self.observations:
                raise MalformedGraphError(f"variable {vid!r} is in no factor and not observed")

    # ------------------------------------------------------------------ indices

    @cached_property
    def var_ids(self) -> tuple[str, ...]:
        return tuple(self.variables)

    @cached_property
    def factor_ids(self) -> tuple[str, ...]:
        return tuple(self.factors)

    @cached_property
    def observed(self) -> tuple[str, ...]:
        """Observed variables (Y) in canonical variable order."""
        return tuple(v for v in self.var_ids if v in self.observations)

    @cached_property
    def hidden(self) -> tuple[str, ...]:
        return tuple(v for v in self.var_ids if v not in self.observations)

    @cached_property
    def symbol_index(self) -> dict[str, dict[Symbol, int]]:
        return {v: {s: k for k, s in enumerate(a)} for v, a in self.variables.items()}

    @cached_property
    def incident(self) -> dict[str, tuple[str, ...]]:
        """Indicator factors touching each variable, in canonical factor order."""
        inc = {v: [] for v in self.var_ids}
        for fid, f in self.factors.items():
            for v in f.scope:
                inc[v].append(fid)
        return {v: tuple(fs) for v, fs in inc.items()}

    @cached_property
    def rows(self) -> dict[str, np.ndarray]:
        """Behavior rows as symbol-index arrays of shape (|B_j|, |I_j|)."""
        out = {}
        for fid, f in self.factors.items():
            idx = [[self.symbol_index[v][s] for v, s in zip(f.scope, row)] for row in f.behavior]
            out[fid] = np.array(idx, dtype=np.int64).reshape(len(f.behavior), len(f.scope))
        return out

    @cached_property
    def row_index(self) -> dict[str, dict[tuple, int]]:
        return {fid: {row: k for k, row in enumerate(f.behavior)} for fid, f in self.factors.items()}

    @cached_property
    def offsets(self) -> dict[str, int]:
        """Start of each variable's block in the full indicator vector."""
        out, pos = {}, 0
        for v in self.var_ids:
            out[v] = pos
            pos += len(self.variables[v])
        return out

    @property
    def n_full(self) -> int:
        return sum(len(a) for a in self.variables.values())

    def log_weights(self, vid: str) -> np.ndarray:
        """log h_i over the alphabet of an observed variable."""
        w = self.observations[vid].weights
        return np.array([math.log(w[s]) for s in self.variables[vid]])

    def with_observations(self, observations: Mapping[str, Mapping[Symbol, float]]) -> "FactorGraph":
        """Copy of the graph with the observation factors replaced."""
        return FactorGraph(self.variables, self.factors, observations)

    # ------------------------------------------------------------------ helpers

    def check_configuration(self, x: Configuration) -> None:
        if set(x) != set(self.variables):
            missing = set(self.variables) - set(x)
            extra = set(x) - set(self.variables)
            raise MalformedConfigurationError(
                f"configuration not total over variables (missing={sorted(missing)}, extra={sorted(extra)})")
        for vid, sym in x.items():
            if sym not in self.symbol_index[vid]:
                raise MalformedConfigurationError(f"symbol {sym!r} not in alphabet of {vid!r}")

    def projection(self, x: Configuration, fid: str) -> tuple:
        return tuple(x[v] for v in self.factors[fid].scope)

    def configuration_key(self, x: Configuration) -> tuple[int, ...]:
        """Canonical sort key: symbol indices in canonical variable order."""
        return tuple(self.symbol_index[v][x[v]] for v in self.var_ids)

    def score(self, x: Configuration) -> float:
        """Sum of log h_i(x_i) over observed variables."""
        return sum(math.log(self.observations[v].weights[x[v]]) for v in self.observed)

    @property
    def search_space_size(self) -> int:
        return math.prod(len(a) for a in self.variables.values())


# ---------------------------------------------------------------------- operations


def is_valid(graph: FactorGraph, x: Configuration) -> bool:
    """True iff every indicator factor's projection of ``x`` lies in its behavior."""
    graph.check_configuration(x)
    return all(graph.projection(x, fid) in graph.row_index[fid] for fid in graph.factor_ids)


def _search_order(graph: FactorGraph) -> list[str]:
    # greedy: next variable is the one sharing most factors with assigned ones,
    # so that factors complete (and prune) as early as possible
    order, assigned = [], set()
    remaining = list(graph.var_ids)
    while remaining:
        def pressure(v):
            score = 0
            for fid in graph.incident[v]:
                scope = graph.factors[fid].scope
                done = sum(u in assigned for u in scope)
                score += done + (done == len(scope) - 1) * 100
            return score
        best = max(remaining, key=lambda v: (pressure(v), -remaining.index(v)))
        order.append(best)
        assigned.add(best)
        remaining.remove(best)
    return order


def enumerate_behavior(graph: FactorGraph, cap: int | None = DEFAULT_ENUMERATION_CAP) -> Iterator[dict]:
    """Yield every valid configuration by backtracking.

    Raises :class:`InstanceTooLargeError` when the configuration space exceeds
    ``cap`` (pass ``cap=None`` to opt out for structured instances).
    """
    if cap is not None and graph.search_space_size > cap:
        raise InstanceTooLargeError(
            f"configuration space {graph.search_space_size} exceeds enumeration cap {cap}")
    order = _search_order(graph)
    position = {v: k for k, v in enumerate(order)}
    # factors checked at the depth where their last scope variable is assigned
    due = [[] for _ in order]
    for fid, f in graph.factors.items():
        due[max(position[v] for v in f.scope)].append(fid)
    x: dict = {}

    def rec(depth):
        if depth == len(order):
            yield {v: x[v] for v in graph.var_ids}
            return
        v = order[depth]
        for sym in graph.variables[v]:
            x[v] = sym
            if all(graph.projection(x, fid) in graph.row_index[fid] for fid in due[depth]):
                yield from rec(depth + 1)
        del x[v]

    yield from rec(0)


def check_injectivity(graph: FactorGraph, cap: int | None = DEFAULT_ENUMERATION_CAP) -> bool:
    """True iff no two distinct valid configurations share the same projection onto Y."""
    seen = set()
    for x in enumerate_behavior(graph, cap):
        key = tuple(x[v] for v in graph.observed)
        if key in seen:
            return False
        seen.add(key)
    return True


def vectorize(graph: FactorGraph, x: Configuration, mode: str = "full", anchors=None) -> np.ndarray:
    """Indicator vector of a configuration.

    ``full`` covers every variable; ``observed`` only Y; ``reduced`` covers Y
    with each variable's anchor symbol dropped (needs an anchor table).
    """
    if mode == "full":
        vids = graph.var_ids
    elif mode in ("observed", "reduced"):
        vids = graph.observed
    else:
        raise ValueError(f"unknown vectorization mode {mode!r}")
    if mode == "reduced" and anchors is None:
        raise ValueError("reduced vectorization needs an anchor table")
    blocks = []
    for v in vids:
        if x[v] not in graph.symbol_index[v]:
            raise MalformedConfigurationError(f"symbol {x[v]!r} not in alphabet of {v!r}")
        alphabet = graph.variables[v]
        if mode == "reduced":
            alphabet = [s for s in alphabet if s != anchors.anchor_element[v]]
        blocks.append([1.0 if s == x[v] else 0.0 for s in alphabet])
    return np.array([e for b in blocks for e in b])


def devectorize(graph: FactorGraph, vec: Sequence[float]) -> dict:
    """Inverse of full vectorization for 0/1 vectors."""
    x = {}
    for v in graph.var_ids:
        start = graph.offsets[v]
        block = np.asarray(vec[start:start + len(graph.variables[v])])
        hot = np.flatnonzero(block == 1)
        if len(hot) != 1 or np.count_nonzero(block) != 1:
            raise MalformedConfigurationError(f"block of {v!r} is not an indicator vector")
        x[v] = graph.variables[v][hot[0]]
    return x


# ---------------------------------------------------------------------- files

_TOP_FIELDS = {"format", "variables", "factors", "observations"}
_FACTOR_FIELDS = {"scope", "behavior"}


def _from_json(value: Any) -> Symbol:
    if isinstance(value, list):
        return tuple(_from_json(v) for v in value)
    return value


def _to_json(value: Symbol) -> Any:
    if isinstance(value, tuple):
        return [_to_json(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    return value


def graph_from_dict(doc: Mapping[str, Any]) -> FactorGraph:
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise MalformedGraphError(f"unknown fields in factor-graph document: {sorted(unknown)}")
    if doc.get("format", FILE_FORMAT) != FILE_FORMAT:
        raise MalformedGraphError(f"unsupported format {doc.get('format')!r}")
    variables = {v: tuple(_from_json(s) for s in syms) for v, syms in doc.get("variables", {}).items()}
    factors = {}
    for fid, spec in doc.get("factors", {}).items():
        bad = set(spec) - _FACTOR_FIELDS
        if bad:
            raise MalformedGraphError(f"unknown fields in factor {fid!r}: {sorted(bad)}")
        factors[fid] = Factor(tuple(spec["scope"]), tuple(tuple(_from_json(s) for s in row)
                                                          for row in spec["behavior"]))
    observations = {}
    for vid, weights in doc.get("observations", {}).items():
        if vid not in variables:
            raise MalformedGraphError(f"observation on unknown variable {vid!r}")
        if len(weights) != len(variables[vid]):
            raise MalformedGraphError(f"observation on {vid!r} needs one weight per symbol")
        observations[vid] = ObservationFactor(dict(zip(variables[vid], map(float, weights))))
    return FactorGraph(variables, factors, observations)


def graph_to_dict(graph: FactorGraph) -> dict:
    return {
        "format": FILE_FORMAT,
        "variables": {v: [_to_json(s) for s in a] for v, a in graph.variables.items()},
        "factors": {fid: {"scope": list(f.scope), "behavior": [[_to_json(s) for s in row] for row in f.behavior]}
                    for fid, f in graph.factors.items()},
        "observations": {v: [obs.weights[s] for s in graph.variables[v]]
                         for v, obs in graph.observations.items()},
    }


def load_graph(path) -> FactorGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))


def save_graph(graph: FactorGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), indent=1) + "\n")


def configuration_from_json(doc: Mapping[str, Any]) -> dict:
    return {v: _from_json(s) for v, s in doc.items()}


def configuration_to_json(x: Configuration) -> dict:
    return {v: _to_json(s) for v, s in x.items()}
