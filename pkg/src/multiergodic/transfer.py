"""Nonlinear transfer equation N_s psi = psi and the pressure function.

The solver iterates in the log domain,

    log psi(a) <- (1/q) * logsumexp_j [ s*phi(a, j) + log psi(Ta, j) ],

starting from psi = 1.  N_s is order preserving and (1/q)-homogeneous, so the
map is a contraction of ratio 1/q in the sup norm of log psi; working with
logs keeps e^{s phi} from overflowing at large |s|.

psi is extended to shorter words by psi(a)^q = sum_j psi(a, j), one level
further down to the empty word as well: psi(()) = (sum_j psi(j))^(1/q).
That extra level is what makes the initial law of the Markov measure sum
to one, and it gives P(s) = (q-1) q^(ell-1) log psi(()).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .potential import Potential, ShiftParams, _check_word, word_index

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000


class SolverError(RuntimeError):
    """The fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def successor_index(params: ShiftParams) -> np.ndarray:
    """succ[a, j] = index of the state (Ta, j) for state a in S^(ell-1)."""
    M, m = params.n_states, params.m
    return (np.arange(M)[:, None] * m + np.arange(m)[None, :]) % M


@dataclass(frozen=True)
class FixedPoint:
    """Positive fixed point psi_s, stored as log psi on every level 0..ell-1.

    ``log_levels[k]`` has length m**k and is indexed lexicographically;
    ``log_levels[0]`` holds log psi of the empty word.
    """

    potential: Potential
    s: float
    log_levels: tuple = field(repr=False)
    residual: float = 0.0
    iterations: int = 0

    @property
    def params(self) -> ShiftParams:
        return self.potential.params

    @property
    def log_psi_top(self) -> np.ndarray:
        return self.log_levels[-1]

    @property
    def log_psi_empty(self) -> float:
        return float(self.log_levels[0][0])

    def log_psi(self, word: Sequence[int]) -> float:
        w = _check_word(word, self.params.m)
        if len(w) >= self.params.ell:
            raise ValueError(f"psi is defined on words of length < {self.params.ell}")
        return float(self.log_levels[len(w)][word_index(w, self.params.m)])

    def psi(self, word: Sequence[int]) -> float:
        return math.exp(self.log_psi(word))

    def table(self, length: int | None = None) -> np.ndarray:
        if length is None:
            length = self.params.ell - 1
        return np.exp(self.log_levels[length])


def _transfer_log(potential: Potential, s: float, log_y: np.ndarray, succ: np.ndarray) -> np.ndarray:
    """log of L_s y on S^(ell-1), computed stably."""
    return logsumexp(s * potential.table() + log_y[succ], axis=1)


def apply_transfer(potential: Potential, s: float, y) -> np.ndarray:
    """(N_s y)(a) = (sum_j e^{s phi(a, j)} y(Ta, j))^(1/q) for positive y on S^(ell-1)."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != potential.params.n_states:
        raise ValueError(f"y must have {potential.params.n_states} entries")
    if not np.all(y > 0):
        raise ValueError("apply_transfer requires strictly positive input")
    succ = successor_index(potential.params)
    return np.exp(_transfer_log(potential, s, np.log(y), succ) / potential.q)


def extend_levels(log_top: np.ndarray, m: int, q: int, ell: int) -> tuple:
    """Extend log psi from S^(ell-1) down to the empty word."""
    levels = [log_top]
    cur = log_top
    for _ in range(ell - 1):
        cur = logsumexp(cur.reshape(-1, m), axis=1) / q
        levels.append(cur)
    return tuple(reversed(levels))


def _scaled_gap(log_lhs: np.ndarray, log_rhs: np.ndarray) -> float:
    # |lhs - rhs| / max(1, rhs), evaluated without leaving the log domain
    gap = np.abs(np.expm1(log_lhs - log_rhs)) * np.exp(np.minimum(0.0, log_rhs))
    return float(np.max(gap))


def residual(potential: Potential, s: float, fp: FixedPoint | Sequence) -> float:
    """Scaled sup defect of the transfer equation and of the level extension.

    ``fp`` is a FixedPoint or a list of psi tables (not logs), one per level
    0..ell-1.  Defects are |lhs - rhs| / max(1, rhs).
    """
    p = potential.params
    if isinstance(fp, FixedPoint):
        logs = list(fp.log_levels)
    else:
        tables = [np.asarray(lv, dtype=float).ravel() for lv in fp]
        if any(np.any(t <= 0) for t in tables):
            return math.inf
        logs = [np.log(t) for t in tables]
    if len(logs) != p.ell:
        raise ValueError(f"expected {p.ell} levels of psi")
    succ = successor_index(p)
    top = logs[-1]
    worst = _scaled_gap(_transfer_log(potential, s, top, succ) / p.q, top)
    for k in range(p.ell - 1):
        rhs = logsumexp(logs[k + 1].reshape(-1, p.m), axis=1) / p.q
        worst = max(worst, _scaled_gap(logs[k], rhs))
    return worst


def solve_fixed_point(
    potential: Potential,
    s: float,
    cfg: SolverConfig | None = None,
    log_start: np.ndarray | None = None,
) -> FixedPoint:
    """Unique positive fixed point of N_s, by iteration from psi = 1.

    ``log_start`` overrides the starting point (used to check uniqueness).
    Raises SolverError (carrying the best iterate) if max_iter is hit.
    """
    cfg = cfg or SolverConfig()
    s = float(s)
    if not math.isfinite(s):
        raise ValueError("s must be finite")
    p = potential.params
    succ = successor_index(p)
    log_y = np.zeros(p.n_states) if log_start is None else np.array(log_start, dtype=float)
    for it in range(1, cfg.max_iter + 1):
        new = _transfer_log(potential, s, log_y, succ) / p.q
        log_step = float(np.max(np.abs(new - log_y)))
        log_y = new
        # log psi can be O(|s|); roundoff in the log metric scales with it
        if log_step <= cfg.tol * max(1.0, float(np.max(np.abs(log_y)))):
            levels = extend_levels(log_y, p.m, p.q, p.ell)
            res = residual(potential, s, FixedPoint(potential, s, levels))
            if res <= cfg.tol:
                return FixedPoint(potential, s, levels, res, it)
    levels = extend_levels(log_y, p.m, p.q, p.ell)
    best = FixedPoint(potential, s, levels, 0.0, cfg.max_iter)
    res = residual(potential, s, best)
    best = FixedPoint(potential, s, levels, res, cfg.max_iter)
    raise SolverError(f"no convergence at s={s} after {cfg.max_iter} iterations (residual {res:.3e})", best)


def pressure(fp: FixedPoint) -> float:
    """P(s) = (q-1) q^(ell-2) log sum_j psi_s(j)."""
    p = fp.params
    return (p.q - 1) * p.q ** (p.ell - 2) * float(logsumexp(fp.log_levels[1]))


def pressure_at(potential: Potential, s: float, cfg: SolverConfig | None = None) -> float:
    return pressure(solve_fixed_point(potential, s, cfg))
