"""Cylinder-mass oracles, telescopic product measures and their dimensions.

Base measures on the full shift are exposed through ``CylinderMeasure``:
masses of cylinders [w] (w indexed from 0 here, as a base measure lives on
one column Lambda_i), batched log masses, window marginals and entropies.
Masses are carried as logs wherever products get long.

Telescopic product measure: for a word u of length n,

    P_mu([u]) = prod_{i <= n, q does not divide i} mu([u_i u_{iq} u_{iq^2} ...]).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

from .potential import (
    Potential,
    cell_generators_by_length,
    _check_word,
    index_decompose,
    partition_cells,
    word_index,
)
from .transfer import FixedPoint, SolverConfig, solve_fixed_point, successor_index

# largest number of cylinders we are willing to enumerate
MAX_ENUMERATION = 2**24
NORMALIZATION_TOL = 1e-9


class MeasureError(ValueError):
    pass


class EnumerationLimit(RuntimeError):
    """Requested accuracy needs more cylinders than MAX_ENUMERATION.

    ``value`` is the truncated result and ``bound`` the tail bound it carries.
    """

    def __init__(self, msg, value=None, bound=None):
        super().__init__(msg)
        self.value = value
        self.bound = bound


def _guard(m: int, k: int):
    if m**k > MAX_ENUMERATION:
        raise EnumerationLimit(f"{m}**{k} cylinders exceeds the enumeration limit")


def _entropy_of(masses: np.ndarray) -> float:
    return float(-xlogy(masses, masses).sum())


class CylinderMeasure:
    """Probability measure on the full shift over m symbols, via cylinder masses.

    Subclasses implement ``log_masses(k)``; everything else has a generic
    (enumerating) fallback that structured measures override.
    """

    m: int

    def log_masses(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def masses(self, k: int) -> np.ndarray:
        return np.exp(self.log_masses(k))

    def log_mass(self, word: Sequence[int]) -> float:
        w = _check_word(word, self.m)
        if not w:
            return 0.0
        return float(self.log_mass_batch(np.asarray([w], dtype=np.int64))[0])

    def mass(self, word: Sequence[int]) -> float:
        return math.exp(self.log_mass(word))

    def log_mass_batch(self, words: np.ndarray) -> np.ndarray:
        """Log masses of many words of a common length (rows of ``words``)."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        k = words.shape[1]
        if k == 0:
            return np.zeros(words.shape[0])
        idx = np.zeros(words.shape[0], dtype=np.int64)
        for t in range(k):
            idx = idx * self.m + words[:, t]
        return self.log_masses(k)[idx]

    def window_distribution(self, start: int, length: int) -> np.ndarray:
        """Law of (x_start, ..., x_{start+length-1}) over S^length, 0-indexed."""
        _guard(self.m, start + length)
        return self.masses(start + length).reshape(self.m**start, self.m**length).sum(axis=0)

    def entropy(self, k: int) -> float:
        if k < 1:
            raise ValueError("k must be >= 1")
        _guard(self.m, k)
        return _entropy_of(self.masses(k))

    def entropies(self, K: int) -> np.ndarray:
        """H_1, ..., H_K."""
        return np.array([self.entropy(k) for k in range(1, K + 1)])

    def conditional_cdfs(self, k: int) -> np.ndarray:
        """cdf of the next symbol given each prefix of length k, shape (m**k, m)."""
        _guard(self.m, k + 1)
        prev = self.masses(k)
        nxt = self.masses(k + 1).reshape(-1, self.m)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(prev[:, None] > 0, nxt / prev[:, None], 1.0 / self.m)
        return np.cumsum(cond, axis=1)

    def sample_words(self, uniforms: np.ndarray) -> np.ndarray:
        """Map an (N, L) array of uniforms to N independent words of length L."""
        U = np.atleast_2d(uniforms)
        N, L = U.shape
        out = np.empty((N, L), dtype=np.int64)
        idx = np.zeros(N, dtype=np.int64)
        for t in range(L):
            cdf = self.conditional_cdfs(t)[idx]
            out[:, t] = _draw(cdf, U[:, t])
            idx = idx * self.m + out[:, t]
        return out


def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse cdf; the clip guards cdf[-1] slightly below 1 from roundoff
    sym = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(sym, cdf.shape[1] - 1)


class Bernoulli(CylinderMeasure):
    """i.i.d. symbols with probability vector p."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float).ravel()
        if p.size < 2 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise MeasureError(f"not a probability vector on >= 2 symbols: {p}")
        self.p = p / p.sum()
        self.m = p.size
        with np.errstate(divide="ignore"):
            self.log_p = np.log(self.p)

    def __repr__(self):
        return f"Bernoulli({self.p.tolist()})"

    def log_masses(self, k):
        _guard(self.m, k)
        out = np.zeros(1)
        for _ in range(k):
            out = (out[:, None] + self.log_p[None, :]).ravel()
        return out

    def log_mass_batch(self, words):
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return self.log_p[words].sum(axis=1)

    def window_distribution(self, start, length):
        return self.masses(length)

    def entropy(self, k):
        return k * _entropy_of(self.p)

    def sample_words(self, uniforms):
        U = np.atleast_2d(uniforms)
        cdf = np.cumsum(self.p)
        sym = np.searchsorted(cdf, U.ravel(), side="right").reshape(U.shape)
        return np.minimum(sym, self.m - 1)


def lebesgue(m: int) -> Bernoulli:
    return Bernoulli(np.full(m, 1.0 / m))


def point_mass(m: int, symbol: int = 0) -> Bernoulli:
    p = np.zeros(m)
    p[symbol] = 1.0
    return Bernoulli(p)


class CylinderTable(CylinderMeasure):
    """A measure known only through its cylinder masses up to a fixed depth."""

    def __init__(self, m: int, masses_at_depth):
        t = np.asarray(masses_at_depth, dtype=float).ravel()
        depth = round(math.log(t.size, m)) if t.size > 1 else 0
        if depth < 1 or m**depth != t.size:
            raise MeasureError(f"table size {t.size} is not a positive power of m={m}")
        if np.any(t < 0) or abs(t.sum() - 1) > 1e-9:
            raise MeasureError("table masses must be non-negative and sum to 1")
        self.m = m
        self.depth = depth
        self._top = t / t.sum()

    def masses(self, k):
        if k > self.depth:
            raise EnumerationLimit(f"cylinder table only reaches depth {self.depth}, asked for {k}")
        return self._top.reshape(self.m**k, -1).sum(axis=1)

    def log_masses(self, k):
        with np.errstate(divide="ignore"):
            return np.log(self.masses(k))


class MarkovMeasure(CylinderMeasure):
    """Markov measure of order r on m symbols: initial law on S^r, kernel S^r x S.

    The measure built from psi_s has r = ell - 1.
    """

    def __init__(self, m: int, order: int, log_initial, log_transition, check: bool = True):
        self.m = m
        self.order = order
        self.log_initial = np.asarray(log_initial, dtype=float).ravel()
        self.log_transition = np.asarray(log_transition, dtype=float).reshape(m**order, m)
        if self.log_initial.size != m**order:
            raise MeasureError("initial law has the wrong size")
        if check:
            init_def = abs(math.expm1(float(logsumexp(self.log_initial))))
            row_def = float(np.max(np.abs(np.expm1(logsumexp(self.log_transition, axis=1)))))
            if init_def > NORMALIZATION_TOL or row_def > NORMALIZATION_TOL:
                raise MeasureError(
                    f"normalization defect: initial {init_def:.2e}, transition rows {row_def:.2e}"
                )
        # prefix marginals of the initial law, lengths 0..order
        levels = [self.log_initial]
        for _ in range(order):
            levels.append(logsumexp(levels[-1].reshape(-1, m), axis=1))
        self._prefix_logs = tuple(reversed(levels))
        self._succ = (np.arange(m**order)[:, None] * m + np.arange(m)[None, :]) % (m**order)
        self._state_marginals = [np.exp(self.log_initial)]

    @classmethod
    def from_arrays(cls, initial, transition, order: int = 1):
        initial = np.asarray(initial, dtype=float)
        transition = np.asarray(transition, dtype=float)
        m = transition.shape[-1]
        with np.errstate(divide="ignore"):
            return cls(m, order, np.log(initial), np.log(transition))

    @property
    def initial(self) -> np.ndarray:
        return np.exp(self.log_initial)

    @property
    def transition(self) -> np.ndarray:
        return np.exp(self.log_transition)

    def state_marginal(self, t: int) -> np.ndarray:
        """Law of the state (x_t, ..., x_{t+r-1})."""
        cache = self._state_marginals
        Q = self.transition
        while len(cache) <= t:
            nu = cache[-1]
            nxt = np.zeros_like(nu)
            np.add.at(nxt, self._succ, nu[:, None] * Q)
            cache.append(nxt)
        return cache[t]

    def log_masses(self, k):
        _guard(self.m, k)
        r = self.order
        if k <= r:
            return self._prefix_logs[k]
        out = self.log_initial
        for _ in range(k - r):
            last = np.arange(out.size) % self.m**r
            out = (out[:, None] + self.log_transition[last]).ravel()
        return out

    def log_mass_batch(self, words):
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        N, k = words.shape
        r, m = self.order, self.m
        head = min(k, r)
        idx = np.zeros(N, dtype=np.int64)
        for t in range(head):
            idx = idx * m + words[:, t]
        out = self._prefix_logs[head][idx].copy()
        M = m**r
        for t in range(r, k):
            out += self.log_transition[idx, words[:, t]]
            idx = (idx * m + words[:, t]) % M
        return out

    def window_distribution(self, start, length):
        r, m = self.order, self.m
        nu = self.state_marginal(start)
        if length <= r:
            return nu.reshape(m**length, -1).sum(axis=1)
        Q = self.transition
        dist = nu
        for _ in range(length - r):
            last = np.arange(dist.size) % m**r
            dist = (dist[:, None] * Q[last]).ravel()
        return dist

    def entropy(self, k):
        return float(self.entropies(k)[-1])

    def entropies(self, K):
        r = self.order
        out = []
        for k in range(1, min(K, r) + 1):
            out.append(_entropy_of(np.exp(self._prefix_logs[k])))
        if K > r:
            Q = self.transition
            row_h = -xlogy(Q, Q).sum(axis=1)
            h = _entropy_of(self.initial)
            for k in range(r + 1, K + 1):
                h += float(self.state_marginal(k - 1 - r) @ row_h)
                out.append(h)
        return np.array(out)

    def conditional_cdfs(self, k):
        if k >= self.order:
            return np.cumsum(self.transition, axis=1)
        return super().conditional_cdfs(k)

    def sample_words(self, uniforms):
        U = np.atleast_2d(uniforms)
        N, L = U.shape
        r, m = self.order, self.m
        out = np.empty((N, L), dtype=np.int64)
        idx = np.zeros(N, dtype=np.int64)
        for t in range(min(L, r)):
            cdf = self.conditional_cdfs(t)[idx]
            out[:, t] = _draw(cdf, U[:, t])
            idx = idx * m + out[:, t]
        if L > r:
            cdf_all = np.cumsum(self.transition, axis=1)
            M = m**r
            for t in range(r, L):
                out[:, t] = _draw(cdf_all[idx], U[:, t])
                idx = (idx * m + out[:, t]) % M
        return out


def markov_from_fixed_point(fp: FixedPoint) -> MarkovMeasure:
    """The (ell-1)-step Markov measure mu_s built from psi_s.

    initial(a_1..a_{ell-1}) = prod_j psi(a_1..a_j) / psi(a_1..a_{j-1})^q
    Q(a, j) = e^{s phi(a, j)} psi(Ta, j) / psi(a)^q
    """
    p = fp.params
    m, q, r = p.m, p.q, p.ell - 1
    log_init = np.zeros(1)
    for k in range(1, r + 1):
        parent = np.repeat(fp.log_levels[k - 1], m)
        log_init = np.repeat(log_init, m) + fp.log_levels[k] - q * parent
    top = fp.log_psi_top
    log_Q = fp.s * fp.potential.table() + top[successor_index(p)] - q * top[:, None]
    return MarkovMeasure(m, r, log_init, log_Q)


def markov_mu_s(potential: Potential, s: float, cfg: SolverConfig | None = None) -> MarkovMeasure:
    return markov_from_fixed_point(solve_fixed_point(potential, s, cfg))


def markov_cylinder(mm: MarkovMeasure, word: Sequence[int]) -> float:
    return mm.mass(word)


@dataclass
class TelescopicMeasure:
    base: CylinderMeasure
    q: int

    @property
    def m(self) -> int:
        return self.base.m

    def log_cylinder(self, word: Sequence[int]) -> float:
        """log P_mu([word]); -inf for null cylinders."""
        x = np.asarray(_check_word(word, self.m), dtype=np.int64)
        if x.size == 0:
            return 0.0
        return self.log_cylinder_sequence(x)

    def cylinder(self, word: Sequence[int]) -> float:
        return math.exp(self.log_cylinder(word))

    def log_cylinder_sequence(self, x: np.ndarray) -> float:
        """Vectorized log mass of the cylinder of a 1-indexed sequence x (x[0] = x_1)."""
        x = np.asarray(x, dtype=np.int64)
        n = x.size
        total = 0.0
        for k, gens in cell_generators_by_length(n, self.q).items():
            pos = gens[:, None] * self.q ** np.arange(k)[None, :]
            lm = self.base.log_mass_batch(x[pos - 1])
            if np.any(lm > 1e-12):
                raise MeasureError("base measure returned a mass above 1")
            total += float(lm.sum())
        return total


def telescopic_cylinder(tm: TelescopicMeasure, word: Sequence[int]) -> tuple[float, float]:
    """(mass, log mass) of a cylinder under the telescopic product measure."""
    lm = tm.log_cylinder(word)
    return math.exp(lm), lm


def entropy_Hk(oracle: CylinderMeasure, k: int) -> float:
    return oracle.entropy(k)


def _series_tail(q: int, K: int) -> float:
    """(q-1)^2 * sum_{k>K} k / q^(k+1), in closed form."""
    x = 1.0 / q
    # sum_{k>K} k x^k = x^(K+1) ((K+1) - K x) / (1-x)^2
    tail = x ** (K + 1) * ((K + 1) - K * x) / (1 - x) ** 2
    return (q - 1) ** 2 * x * tail


def series_depth(q: int, tol: float, scale: float = 1.0) -> int:
    """Smallest K with scale * (q-1)^2 sum_{k>K} k/q^(k+1) < tol."""
    K = 1
    while scale * _series_tail(q, K) >= tol:
        K += 1
    return K


def telescopic_dimension(oracle: CylinderMeasure, q: int, tol: float = 1e-10) -> float:
    """(q-1)^2 / log m * sum_k H_k / q^(k+1), truncated using H_k <= k log m."""
    K = series_depth(q, tol)
    log_m = math.log(oracle.m)
    try:
        H = oracle.entropies(K)
    except EnumerationLimit:
        Kmax = max(k for k in range(1, K + 1) if oracle.m**k <= MAX_ENUMERATION)
        if isinstance(oracle, CylinderTable):
            Kmax = min(Kmax, oracle.depth)
        H = oracle.entropies(Kmax)
        w = (q - 1) ** 2 / q ** (np.arange(1, Kmax + 1) + 1.0)
        raise EnumerationLimit(
            f"tolerance {tol} needs depth {K}; stopped at {Kmax}",
            value=float(w @ H) / log_m,
            bound=_series_tail(q, Kmax),
        ) from None
    w = (q - 1) ** 2 / q ** (np.arange(1, K + 1) + 1.0)
    return float(w @ H) / log_m


def window_expectations(oracle: CylinderMeasure, p: Potential, count: int) -> np.ndarray:
    """E_mu phi(x_j, ..., x_{j+ell-1}) for j = 0..count-1."""
    return np.array([oracle.window_distribution(j, p.ell) @ p.values for j in range(count)])


def m_functional(oracle: CylinderMeasure, p: Potential, q: int | None = None, tol: float = 1e-12) -> float:
    """(q-1)^2 sum_k q^-(k+1) sum_{j<k} E_mu phi(x_j..x_{j+ell-1}), series truncated by tail bound."""
    q = p.q if q is None else q
    if oracle.m != p.m:
        raise MeasureError("measure and potential use different alphabets")
    K = series_depth(q, tol, p.sup_norm)
    e = window_expectations(oracle, p, K)
    partial = np.cumsum(e)
    w = (q - 1) ** 2 / q ** (np.arange(1, K + 1) + 1.0)
    return float(w @ partial)


def markov_dimension_formula(p: Potential, s: float, cfg: SolverConfig | None = None) -> float:
    """[-s P'(s) + P(s)] / (q^(ell-1) log m)."""
    from .pressure import derivative_and_pressure

    d, P = derivative_and_pressure(p, s, cfg=cfg)
    return (-s * d + P) / (p.q ** (p.ell - 1) * math.log(p.m))


def _lambda_window(k: int, q: int, ell: int) -> list[int]:
    """Positions feeding psi in the Gibbs decomposition at index k (1-indexed)."""
    i, j = index_decompose(k, q)
    column = [i * q**t for t in range(j + 1)]
    return column[-(ell - 1):] if j + 1 > ell - 1 else column


def gibbs_rhs(fp: FixedPoint, word: Sequence[int]) -> float:
    """Right-hand side of the Gibbs mass decomposition for log P_{mu_s}([x_1^n])."""
    p = fp.potential
    q, ell = p.q, p.ell
    x = _check_word(word, p.m)
    n = len(x)

    def B(t):
        total = 0.0
        for k in range(1, t + 1):
            total += fp.log_psi([x[pos - 1] for pos in _lambda_window(k, q, ell)])
        return total

    ergodic = 0.0
    for j in range(1, n // q ** (ell - 1) + 1):
        ergodic += p.values[word_index([x[j * q**t - 1] for t in range(ell)], p.m)]
    return fp.s * ergodic - (n - n // q) * q * fp.log_psi_empty - q * B(n // q) + B(n)


def gibbs_identity_defect(p: Potential, s: float, word: Sequence[int], cfg: SolverConfig | None = None) -> float:
    """|log P_{mu_s}([w]) - Gibbs decomposition|, both computed independently."""
    if len(word) < 1:
        raise ValueError("word must be non-empty")
    fp = solve_fixed_point(p, s, cfg)
    tm = TelescopicMeasure(markov_from_fixed_point(fp), p.q)
    return abs(tm.log_cylinder(word) - gibbs_rhs(fp, word))


def telescopic_log_mass_by_cells(tm: TelescopicMeasure, word: Sequence[int]) -> float:
    """Reference evaluation of log P_mu([word]) cell by cell (slow, for cross-checks)."""
    x = _check_word(word, tm.m)
    total = 0.0
    for cell in partition_cells(len(x), tm.q):
        total += tm.base.log_mass([x[pos - 1] for pos in cell.positions])
    return total


__all__ = [
    "Bernoulli",
    "CylinderMeasure",
    "CylinderTable",
    "EnumerationLimit",
    "MarkovMeasure",
    "MeasureError",
    "TelescopicMeasure",
    "entropy_Hk",
    "gibbs_identity_defect",
    "lebesgue",
    "m_functional",
    "markov_cylinder",
    "markov_dimension_formula",
    "markov_from_fixed_point",
    "markov_mu_s",
    "point_mass",
    "telescopic_cylinder",
    "telescopic_dimension",
]
