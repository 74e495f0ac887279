"""Solver-neutral linear program carrier and its plain-text dump format."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp


def _as_csr(A, n):
    if A is None:
        return sp.csr_matrix((0, n))
    # keep the object itself when possible so derived LPs share their matrices
    return A if isinstance(A, sp.csr_matrix) else sp.csr_matrix(A)


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Optimize ``objective @ x`` subject to

    ``A_eq @ x == b_eq``, ``A_ub @ x <= b_ub`` and ``lower <= x <= upper``.

    ``sense`` is ``"max"`` or ``"min"``.  ``column_labels[k]`` is a tuple
    naming what column ``k`` stands for, e.g. ``("g", var, symbol)`` or
    ``("p", factor, row_index)``.  ``kind`` records which builder produced it.
    """

    objective: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    column_labels: tuple
    sense: str = "max"
    kind: str = "generic"
    row_labels: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.objective)
        A_eq, A_ub = _as_csr(self.A_eq, n), _as_csr(self.A_ub, n)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "objective", np.asarray(self.objective, dtype=float))
        object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float).reshape(-1))
        object.__setattr__(self, "b_ub", np.asarray(self.b_ub, dtype=float).reshape(-1))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float).reshape(-1))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float).reshape(-1))
        object.__setattr__(self, "column_labels", tuple(self.column_labels))
        if self.sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")
        if A_eq.shape[1] != n or A_ub.shape[1] != n:
            raise ValueError("constraint matrices do not match objective length")
        if A_eq.shape[0] != len(self.b_eq) or A_ub.shape[0] != len(self.b_ub):
            raise ValueError("right-hand sides do not match constraint rows")
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bounds do not match objective length")
        if len(self.column_labels) != n:
            raise ValueError("every column needs a label")
        if self.row_labels and len(self.row_labels) != A_eq.shape[0] + A_ub.shape[0]:
            raise ValueError("row labels must cover equality then inequality rows")

    @property
    def n_columns(self) -> int:
        return len(self.objective)

    @property
    def n_rows(self) -> int:
        return self.A_eq.shape[0] + self.A_ub.shape[0]

    def with_objective(self, objective: Sequence[float]) -> "LinearProgram":
        """Same constraints, new cost vector (constraint matrices are shared)."""
        return replace(self, objective=np.asarray(objective, dtype=float))

    def value(self, x: Sequence[float]) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))

    def residuals(self, x: Sequence[float]) -> dict[str, float]:
        """Max violation of each constraint family at ``x``."""
        x = np.asarray(x, dtype=float)
        eq = np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0)
        ub = np.maximum(self.A_ub @ x - self.b_ub, 0).max(initial=0.0)
        lo = np.maximum(self.lower - x, 0).max(initial=0.0)
        hi = np.maximum(x - self.upper, 0).max(initial=0.0)
        return {"eq": float(eq), "ub": float(ub), "lower": float(lo), "upper": float(hi)}

    def column_index(self) -> dict[Any, int]:
        return {lab: k for k, lab in enumerate(self.column_labels)}


def _fmt(v: float) -> str:
    return repr(float(v))


def _label(lab) -> str:
    if isinstance(lab, str):
        return lab.replace(" ", "")
    return "/".join(str(part).replace(" ", "") for part in lab)


def dump_lp(lp: LinearProgram) -> str:
    """Plain-text interchange dump with stable ordering.

    Layout::

        LPDUMP 1
        KIND <kind>
        SENSE <max|min>
        COLUMNS <n>
        <k> <label> <objective> <lower> <upper>      (one per column)
        EQ <m>
        <r> <rhs> <nnz> <col>:<coef> ...             (one per row)
        UB <m>
        <r> <rhs> <nnz> <col>:<coef> ...
        END
    """
    out = ["LPDUMP 1", f"KIND {lp.kind}", f"SENSE {lp.sense}", f"COLUMNS {lp.n_columns}"]
    for k, lab in enumerate(lp.column_labels):
        out.append(f"{k} {_label(lab)} {_fmt(lp.objective[k])} {_fmt(lp.lower[k])} {_fmt(lp.upper[k])}")
    for name, A, b in (("EQ", lp.A_eq, lp.b_eq), ("UB", lp.A_ub, lp.b_ub)):
        out.append(f"{name} {A.shape[0]}")
        A = A.tocsr()
        A.sort_indices()
        for r in range(A.shape[0]):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            terms = " ".join(f"{c}:{_fmt(v)}" for c, v in zip(A.indices[lo:hi], A.data[lo:hi]))
            out.append(f"{r} {_fmt(b[r])} {hi - lo} {terms}".rstrip())
    out.append("END")
    return "\n".join(out) + "\n"


def parse_lp_dump(text: str) -> LinearProgram:
    """Read a dump back.  Column labels come back as plain strings."""
    lines = iter(text.splitlines())
    if next(lines, None) != "LPDUMP 1":
        raise ValueError("not an LP dump (missing 'LPDUMP 1' header)")
    kind = next(lines).split(" ", 1)[1]
    sense = next(lines).split(" ", 1)[1]
    n = int(next(lines).split()[1])
    labels, c, lo, hi = [], np.zeros(n), np.zeros(n), np.zeros(n)
    for k in range(n):
        _, lab, ck, lk, hk = next(lines).split()
        labels.append(lab)
        c[k], lo[k], hi[k] = float(ck), float(lk), float(hk)
    mats = []
    for _ in range(2):
        m = int(next(lines).split()[1])
        rows, cols, vals, rhs = [], [], [], np.zeros(m)
        for r in range(m):
            parts = next(lines).split()
            rhs[r] = float(parts[1])
            for term in parts[3:]:
                col, val = term.split(":")
                rows.append(r)
                cols.append(int(col))
                vals.append(float(val))
        mats.append((sp.csr_matrix((vals, (rows, cols)), shape=(m, n)), rhs))
    (A_eq, b_eq), (A_ub, b_ub) = mats
    return LinearProgram(c, A_eq, b_eq, A_ub, b_ub, lo, hi, tuple(labels), sense=sense, kind=kind)


class LPBuilder:
    """Incremental assembly of a :class:`LinearProgram` from labelled columns."""

    def __init__(self):
        self.labels: list = []
        self.index: dict = {}
        self.cost: list[float] = []
        self.upper: list[float] = []
        self._eq: list[tuple[dict, float, Any]] = []
        self._ub: list[tuple[dict, float, Any]] = []

    def column(self, label, cost: float = 0.0, upper: float = np.inf) -> int:
        k = len(self.labels)
        self.labels.append(label)
        self.index[label] = k
        self.cost.append(cost)
        self.upper.append(upper)
        return k

    def equality(self, coefs: dict, rhs: float, label=None):
        self._eq.append((coefs, rhs, label))

    def inequality(self, coefs: dict, rhs: float, label=None):
        self._ub.append((coefs, rhs, label))

    @staticmethod
    def _matrix(rows, n):
        r, c, v = [], [], []
        for k, (coefs, _, _) in enumerate(rows):
            for col, val in coefs.items():
                if val != 0:
                    r.append(k)
                    c.append(col)
                    v.append(val)
        return sp.csr_matrix((v, (r, c)), shape=(len(rows), n))

    def build(self, sense: str = "max", kind: str = "generic", meta=None) -> LinearProgram:
        n = len(self.labels)
        return LinearProgram(
            objective=np.array(self.cost, dtype=float),
            A_eq=self._matrix(self._eq, n),
            b_eq=np.array([rhs for _, rhs, _ in self._eq], dtype=float),
            A_ub=self._matrix(self._ub, n),
            b_ub=np.array([rhs for _, rhs, _ in self._ub], dtype=float),
            lower=np.zeros(n),
            upper=np.array(self.upper, dtype=float),
            column_labels=tuple(self.labels),
            sense=sense,
            kind=kind,
            row_labels=tuple(lab for _, _, lab in self._eq) + tuple(lab for _, _, lab in self._ub),
            meta=dict(meta or {}),
        )
