"""Linear codes over Z_q given by a parity-check matrix, plus code file parsing."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InstanceTooLargeError, UnsupportedModeError

CODEBOOK_CAP = 2**20
FILE_FORMAT = "lpreceiver-code/1"


def _is_prime(q: int) -> bool:
    return q >= 2 and all(q % k for k in range(2, int(q**0.5) + 1))


def rref_mod(H: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(q) (q prime); returns (R, pivot columns)."""
    R = np.array(H, dtype=np.int64) % q
    pivots = []
    row = 0
    for col in range(R.shape[1]):
        if row == R.shape[0]:
            break
        nz = np.flatnonzero(R[row:, col])
        if nz.size == 0:
            continue
        r = row + int(nz[0])
        R[[row, r]] = R[[r, row]]
        R[row] = (R[row] * pow(int(R[row, col]), -1, q)) % q
        for k in range(R.shape[0]):
            if k != row and R[k, col]:
                R[k] = (R[k] - R[k, col] * R[row]) % q
        pivots.append(col)
        row += 1
    return R[:row], pivots


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Code {c : H c = 0 over Z_q}.

    Local codes C_j are enumerated over the support U_j of each nonzero row,
    tuples in lexicographic order of (c_i for i in U_j).
    """

    H: np.ndarray
    q: int = 2
    name: str = ""

    def __post_init__(self):
        H = np.array(self.H, dtype=np.int64) % self.q
        if H.ndim != 2:
            raise ValueError("parity-check matrix must be two-dimensional")
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @cached_property
    def checks(self) -> tuple[int, ...]:
        """Rows with nonempty support (zero rows impose nothing)."""
        return tuple(j for j in range(self.m) if self.H[j].any())

    @cached_property
    def supports(self) -> dict[int, tuple[int, ...]]:
        return {j: tuple(int(i) for i in np.flatnonzero(self.H[j])) for j in self.checks}

    @cached_property
    def local_codes(self) -> dict[int, tuple[tuple[int, ...], ...]]:
        out = {}
        for j, U in self.supports.items():
            coef = self.H[j, list(U)]
            out[j] = tuple(b for b in itertools.product(range(self.q), repeat=len(U))
                           if int(np.dot(coef, b)) % self.q == 0)
        return out

    def syndrome(self, c) -> np.ndarray:
        return (self.H @ np.asarray(c, dtype=np.int64)) % self.q

    def is_codeword(self, c) -> bool:
        c = np.asarray(c)
        return c.shape == (self.n,) and bool(np.all((c >= 0) & (c < self.q))) and not self.syndrome(c).any()

    @cached_property
    def _systematic(self):
        if not _is_prime(self.q):
            return None
        R, pivots = rref_mod(self.H, self.q)
        free = [i for i in range(self.n) if i not in pivots]
        return R, pivots, free

    @property
    def rank(self) -> int:
        if self._systematic is None:
            raise UnsupportedModeError("rank needs a prime ring size")
        return len(self._systematic[1])

    @property
    def k(self) -> int:
        return self.n - self.rank

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def info_positions(self) -> tuple[int, ...]:
        """Positions carrying information symbols under :meth:`encode`."""
        if self._systematic is None:
            raise UnsupportedModeError("systematic encoding needs a prime ring size")
        return tuple(self._systematic[2])

    def encode(self, info) -> np.ndarray:
        """Codeword whose information positions hold ``info``."""
        if self._systematic is None:
            raise UnsupportedModeError("encoding needs a prime ring size")
        R, pivots, free = self._systematic
        info = np.asarray(info, dtype=np.int64) % self.q
        if info.shape != (len(free),):
            raise ValueError(f"expected {len(free)} information symbols")
        c = np.zeros(self.n, dtype=np.int64)
        c[free] = info
        for r, col in enumerate(pivots):
            c[col] = (-(R[r, free] @ info)) % self.q
        return c

    def codebook(self, cap: int = CODEBOOK_CAP) -> np.ndarray:
        """All codewords in lexicographic order, shape (q^k, n)."""
        if self._systematic is not None:
            size = self.q ** self.k
            if size > cap:
                raise InstanceTooLargeError(f"codebook of size {size} exceeds cap {cap}")
            words = np.array([self.encode(u) for u in itertools.product(range(self.q), repeat=self.k)],
                             dtype=np.int64).reshape(size, self.n)
        else:
            if self.q ** self.n > cap:
                raise InstanceTooLargeError("brute-force codebook enumeration exceeds cap")
            words = np.array([c for c in itertools.product(range(self.q), repeat=self.n)
                              if not self.syndrome(c).any()], dtype=np.int64)
        order = np.lexsort(words.T[::-1])
        return words[order]


# ------------------------------------------------------------------ constructors


def circulant(n: int, first_row, q: int = 2, name: str = "") -> LinearCode:
    """n x n circulant: row j is ``first_row`` cyclically shifted right by j."""
    first_row = np.asarray(first_row, dtype=np.int64)
    if first_row.shape != (n,):
        raise ValueError("first_row must have length n")
    H = np.array([np.roll(first_row, j) for j in range(n)])
    return LinearCode(H, q, name or f"circulant-{n}")


def right_circulant(n: int, m: int, offsets, q: int = 2, name: str = "") -> LinearCode:
    """m x n matrix with H[j, i] = 1 iff (i - j) mod n is in ``offsets``."""
    offsets = {int(o) % n for o in offsets}
    H = np.zeros((m, n), dtype=np.int64)
    for j in range(m):
        for o in offsets:
            H[j, (j + o) % n] = 1
    return LinearCode(H, q, name or f"right-circulant-{n}-{m}")


def hamming_7_4() -> LinearCode:
    """The [7,4] Hamming code via the 7x7 circulant with first row 1110100."""
    return circulant(7, [1, 1, 1, 0, 1, 0, 0], name="hamming-7-4-circulant")


def low_density_105() -> LinearCode:
    """Rate-4/7 length-105 low-density code: right-circulant, offsets {0, 13, 48, 60}."""
    return right_circulant(105, 45, [0, 13, 48, 60], name="ldc-105-60")


PRESETS = {"hamming-7-4": hamming_7_4, "ldc-105-60": low_density_105}


def code_from_dict(doc) -> LinearCode:
    known = {"format", "ring_size", "dense", "circulant", "right_circulant", "preset", "name"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown fields in code document: {sorted(unknown)}")
    q = int(doc.get("ring_size", 2))
    name = doc.get("name", "")
    if "preset" in doc:
        return PRESETS[doc["preset"]]()
    if "dense" in doc:
        return LinearCode(np.array(doc["dense"]), q, name)
    if "circulant" in doc:
        spec = doc["circulant"]
        return circulant(int(spec["n"]), spec["first_row"], q, name)
    if "right_circulant" in doc:
        spec = doc["right_circulant"]
        return right_circulant(int(spec["n"]), int(spec["m"]), spec["offsets"], q, name)
    raise ValueError("code document needs one of: preset, dense, circulant, right_circulant")


def parse_grid(text: str, q: int = 2) -> LinearCode:
    """Dense text grid: one matrix row per line, entries separated by spaces or not at all."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split() if " " in line else list(line)
        rows.append([int(p) for p in parts])
    return LinearCode(np.array(rows), q)


def load_code(spec) -> LinearCode:
    """A preset name, a JSON code document (path or dict) or a text-grid file."""
    if isinstance(spec, dict):
        return code_from_dict(spec)
    if isinstance(spec, str) and spec in PRESETS:
        return PRESETS[spec]()
    path = Path(spec)
    text = path.read_text()
    if path.suffix == ".json":
        return code_from_dict(json.loads(text))
    return parse_grid(text)
