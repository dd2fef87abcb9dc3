"""Alphabet/word arithmetic, potentials, and the multiplicative partition of N*.

A potential on ``S^ell`` (``S = {0, ..., m-1}``) is stored as a flat array of
``m**ell`` floats in lexicographic order, first symbol most significant::

    index(a_1, ..., a_ell) = sum_t a_t * m**(ell - t)

Sequence coordinates are 1-indexed throughout: ``x[0]`` of a numpy array is
the coordinate ``x_1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# m**ell must stay exactly representable as an index
MAX_TABLE_SIZE = 2**31


class PotentialError(ValueError):
    """Raised for malformed potential documents or parameters."""


@dataclass(frozen=True)
class ShiftParams:
    m: int
    q: int
    ell: int

    def __post_init__(self):
        for name in ("m", "q", "ell"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise PotentialError(f"{name} must be an integer, got {v!r}")
            if v < 2:
                raise PotentialError(f"{name} must be >= 2, got {v}")
        if self.m**self.ell > MAX_TABLE_SIZE:
            raise PotentialError(f"m**ell = {self.m}**{self.ell} is too large")

    @property
    def n_states(self) -> int:
        """Number of words of length ell-1 (states of the transfer operator)."""
        return self.m ** (self.ell - 1)

    @property
    def n_values(self) -> int:
        return self.m**self.ell


def word_index(word: Sequence[int], m: int) -> int:
    idx = 0
    for a in word:
        idx = idx * m + int(a)
    return idx


def index_word(idx: int, m: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        idx, r = divmod(idx, m)
        out.append(r)
    return tuple(reversed(out))


def all_words(m: int, length: int) -> np.ndarray:
    """All words of a given length as rows of an int array, lexicographic."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((m,) * length).reshape(length, -1).T
    return grids.astype(np.int64)


def _check_word(word: Sequence[int], m: int) -> tuple[int, ...]:
    w = tuple(int(a) for a in word)
    for a in w:
        if not 0 <= a < m:
            raise PotentialError(f"symbol {a} outside alphabet 0..{m - 1}")
    return w


@dataclass(frozen=True)
class Potential:
    params: ShiftParams
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.params.n_values:
            raise PotentialError(
                f"expected {self.params.n_values} values for m={self.params.m}, "
                f"ell={self.params.ell}, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise PotentialError("potential values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, m: int, q: int, ell: int, values: Iterable[float]) -> "Potential":
        return cls(ShiftParams(m, q, ell), np.asarray(list(values), dtype=float))

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def q(self) -> int:
        return self.params.q

    @property
    def ell(self) -> int:
        return self.params.ell

    @property
    def alpha_min(self) -> float:
        return float(self.values.min())

    @property
    def alpha_max(self) -> float:
        return float(self.values.max())

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def is_constant(self) -> bool:
        return self.alpha_min == self.alpha_max

    def table(self) -> np.ndarray:
        """Values reshaped to (m**(ell-1), m): row = state a, column = next symbol j."""
        return self.values.reshape(self.params.n_states, self.m)

    def shifted(self, beta: float) -> "Potential":
        """The potential phi - beta."""
        return Potential(self.params, self.values - beta)

    def to_dict(self) -> dict:
        return {"m": self.m, "q": self.q, "ell": self.ell, "phi": [float(v) for v in self.values]}


def load_potential(source) -> Potential:
    """Build a Potential from a mapping, a JSON string, or a path to a JSON file.

    The document must carry integer fields ``m``, ``q``, ``ell`` and a flat
    numeric array ``phi`` of length ``m**ell`` in lexicographic order.
    """
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        source = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        source = json.loads(source)
    if not isinstance(source, dict):
        raise PotentialError("potential document must be a mapping")
    missing = [k for k in ("m", "q", "ell", "phi") if k not in source]
    if missing:
        raise PotentialError(f"potential document missing fields: {', '.join(missing)}")
    params = ShiftParams(source["m"], source["q"], source["ell"])
    phi = source["phi"]
    if not isinstance(phi, (list, tuple)):
        raise PotentialError("phi must be a flat numeric array")
    try:
        vals = np.array([float(v) for v in phi])
    except (TypeError, ValueError) as exc:
        raise PotentialError(f"phi entries must be numeric: {exc}") from None
    return Potential(params, vals)


def phi_eval(p: Potential, word: Sequence[int]) -> float:
    w = _check_word(word, p.m)
    if len(w) != p.ell:
        raise PotentialError(f"phi takes words of length {p.ell}, got {len(w)}")
    return float(p.values[word_index(w, p.m)])


def index_decompose(k: int, q: int) -> tuple[int, int]:
    """Write k = i * q**j with q not dividing i."""
    if k < 1:
        raise ValueError("k must be >= 1")
    j = 0
    while k % q == 0:
        k //= q
        j += 1
    return k, j


def column_length(i: int, n: int, q: int) -> int:
    """Cardinality of {i, iq, iq^2, ...} intersected with [1, n] (integer arithmetic)."""
    count = 0
    v = i
    while v <= n:
        count += 1
        v *= q
    return count


@dataclass(frozen=True)
class PartitionCell:
    i: int
    positions: tuple[int, ...]

    def __len__(self):
        return len(self.positions)


def partition_cells(n: int, q: int) -> list[PartitionCell]:
    if n < 1:
        raise ValueError("n must be >= 1")
    cells = []
    for i in range(1, n + 1):
        if i % q == 0:
            continue
        pos = []
        v = i
        while v <= n:
            pos.append(v)
            v *= q
        cells.append(PartitionCell(i, tuple(pos)))
    return cells


def count_cells_of_length(n: int, q: int, k: int) -> int:
    """N(n, q, k): number of generators i (q does not divide i) with n/q^k < i <= n/q^(k-1)."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    hi = n // q ** (k - 1)  # largest i with i*q^(k-1) <= n
    lo = n // q**k  # i <= lo have a longer column

    def coprime_upto(t):
        return t - t // q

    return max(0, coprime_upto(hi) - coprime_upto(lo))


def cell_length_counts(n: int, q: int) -> dict[int, int]:
    """All nonzero N(n, q, k), keyed by k."""
    out = {}
    k = 1
    while q ** (k - 1) <= n:
        c = count_cells_of_length(n, q, k)
        if c:
            out[k] = c
        k += 1
    return out


def cell_generators_by_length(n: int, q: int) -> dict[int, np.ndarray]:
    """Generators i <= n (q does not divide i), grouped by column length k."""
    out = {}
    k = 1
    while q ** (k - 1) <= n:
        hi, lo = n // q ** (k - 1), n // q**k
        i = np.arange(lo + 1, hi + 1, dtype=np.int64)
        i = i[i % q != 0]
        if i.size:
            out[k] = i
        k += 1
    return out


def _as_sequence(x) -> np.ndarray:
    return np.asarray(x, dtype=np.int64).ravel()


def multiple_ergodic_terms(p: Potential, x, n: int) -> np.ndarray:
    """phi(x_k, x_{kq}, ..., x_{kq^(ell-1)}) for k = 1..n (1-indexed x)."""
    x = _as_sequence(x)
    need = n * p.q ** (p.ell - 1)
    if x.size < need:
        raise ValueError(f"sequence has {x.size} coordinates, need {need} for n={n}")
    k = np.arange(1, n + 1, dtype=np.int64)
    idx = np.zeros(n, dtype=np.int64)
    for t in range(p.ell):
        idx = idx * p.m + x[k * p.q**t - 1]
    return p.values[idx]


def multiple_ergodic_sum(p: Potential, x, n: int) -> tuple[float, float]:
    """Return (sum, average) of the multiple ergodic sum of order n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = float(math.fsum(multiple_ergodic_terms(p, x, n)))
    return s, s / n
