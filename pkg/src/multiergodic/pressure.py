"""Derivative of the pressure, its limits at +-infinity, the Legendre transform
and the multifractal spectrum dim_H E(alpha) = P*(alpha) / (q^(ell-1) log m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import networkx as nx
import numpy as np
from scipy.optimize import brentq

from .measures import markov_from_fixed_point, series_depth
from .potential import Potential
from .transfer import SolverConfig, pressure, solve_fixed_point, successor_index

DERIVATIVE_TOL = 1e-12
ENDPOINT_S0 = 4.0
ENDPOINT_MAX_DOUBLINGS = 6


class EmptyLevelSet(ValueError):
    """alpha lies outside [P'(-inf), P'(+inf)], so E(alpha) is empty."""


class EndpointError(RuntimeError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


def derivative_and_pressure(
    p: Potential, s: float, tol: float = DERIVATIVE_TOL, cfg: SolverConfig | None = None
) -> tuple[float, float]:
    """(P'(s), P(s)) from a single fixed-point solve.

    P'(s) = (q-1)^2 sum_k q^-(k+1) sum_{j<k} e_j with e_j the mu_s-expectation
    of phi on the window starting at j.  The e_j come from pushing the law of
    the state (x_j, ..., x_{j+ell-2}) forward through Q_s.
    """
    fp = solve_fixed_point(p, s, cfg)
    mm = markov_from_fixed_point(fp)
    Q = mm.transition
    row_mean = (Q * p.table()).sum(axis=1)
    succ = successor_index(p.params)
    K = series_depth(p.q, tol, p.sup_norm)
    nu = mm.initial
    e = np.empty(K)
    for j in range(K):
        e[j] = nu @ row_mean
        nxt = np.zeros_like(nu)
        np.add.at(nxt, succ, nu[:, None] * Q)
        nu = nxt
    weights = (p.q - 1) ** 2 / float(p.q) ** (np.arange(1, K + 1) + 1)
    return float(weights @ np.cumsum(e)), pressure(fp)


def ruelle_derivative(p: Potential, s: float, tol: float = DERIVATIVE_TOL, cfg: SolverConfig | None = None) -> float:
    return derivative_and_pressure(p, s, tol, cfg)[0]


def fd_derivative(p: Potential, s: float, h: float = 1e-5, cfg: SolverConfig | None = None) -> float:
    """Central difference (P(s+h) - P(s-h)) / 2h."""
    if not h > 0:
        raise ValueError("h must be > 0")
    up = pressure(solve_fixed_point(p, s + h, cfg))
    down = pressure(solve_fixed_point(p, s - h, cfg))
    return (up - down) / (2 * h)


@dataclass(frozen=True)
class EndpointEstimate:
    direction: int
    value: float  # P'(s) at the last s visited
    s: float
    pressure: float
    step: float  # |P'(s_t) - P'(s_{t-1})| at the stop
    converged: bool

    @property
    def legendre(self) -> float:
        """-s P'(s) + P(s) at the last s, which is monotone in s toward P*(endpoint)."""
        return -self.s * self.value + self.pressure


def endpoint_estimate(p: Potential, direction: int, tol: float = 1e-6, cfg: SolverConfig | None = None) -> EndpointEstimate:
    """Follow P'(+-s0 2^t), t = 0..6, until successive values differ by < tol."""
    sign = 1 if direction > 0 else -1
    prev = None
    step = math.inf
    for t in range(ENDPOINT_MAX_DOUBLINGS + 1):
        s = sign * ENDPOINT_S0 * 2**t
        d, P = derivative_and_pressure(p, s, cfg=cfg)
        if prev is not None:
            step = abs(d - prev)
            if step < tol:
                return EndpointEstimate(sign, d, s, P, step, True)
        prev = d
    return EndpointEstimate(sign, d, s, P, step, False)


def derivative_at_infinity(p: Potential, direction: int, tol: float = 1e-6, cfg: SolverConfig | None = None) -> float:
    """P'(+inf) for direction > 0, P'(-inf) otherwise."""
    est = endpoint_estimate(p, direction, tol, cfg)
    if not est.converged:
        raise EndpointError(
            f"P'({'+' if direction > 0 else '-'}inf) not settled to {tol} by s={est.s}: last value {est.value}",
            est,
        )
    return est.value


def extremal_attained(p: Potential, which: str = "min") -> tuple[bool, Optional[tuple[int, ...]]]:
    """Is there a sequence whose every ell-window takes the extreme value of phi?

    Equivalent to a cycle in the graph on S^(ell-1) with an edge a -> (Ta, j)
    whenever phi(a, j) is the extreme value.  The witness is one period of such
    a sequence.
    """
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    target = p.alpha_min if which == "min" else p.alpha_max
    table = p.table()
    succ = successor_index(p.params)
    G = nx.DiGraph()
    hits = np.argwhere(table == target)
    for a, j in hits:
        G.add_edge(int(a), int(succ[a, j]), symbol=int(j))
    try:
        cycle = nx.find_cycle(G)
    except nx.NetworkXNoCycle:
        return False, None
    r, m = p.ell - 1, p.m
    start = cycle[0][0]
    seq = list(_state_word(start, m, r)) + [G.edges[u, v]["symbol"] for u, v in cycle]
    return True, tuple(seq[: len(cycle)])


def _state_word(idx: int, m: int, r: int) -> tuple[int, ...]:
    out = []
    for _ in range(r):
        idx, d = divmod(idx, m)
        out.append(d)
    return tuple(reversed(out))


@dataclass(frozen=True)
class SpectrumDomain:
    lower: float
    upper: float
    lower_attains_min: bool
    upper_attains_max: bool
    lower_estimate: EndpointEstimate
    upper_estimate: EndpointEstimate
    witness_min: Optional[tuple[int, ...]] = None
    witness_max: Optional[tuple[int, ...]] = None

    def endpoint_tol(self, tol: float) -> tuple[float, float]:
        return max(tol, self.lower_estimate.step), max(tol, self.upper_estimate.step)


def spectrum_domain(p: Potential, tol: float = 1e-6, cfg: SolverConfig | None = None) -> SpectrumDomain:
    lo = endpoint_estimate(p, -1, tol, cfg)
    hi = endpoint_estimate(p, +1, tol, cfg)
    att_min, w_min = extremal_attained(p, "min")
    att_max, w_max = extremal_attained(p, "max")
    return SpectrumDomain(lo.value, hi.value, att_min, att_max, lo, hi, w_min, w_max)


@dataclass(frozen=True)
class SpectrumPoint:
    alpha: float
    s_star: float  # +-inf at the endpoints of the domain
    pressure_at_s: float
    legendre: float
    dimension: float
    empty: bool = False


def _normalizer(p: Potential) -> float:
    return p.q ** (p.ell - 1) * math.log(p.m)


def legendre(
    p: Potential,
    alpha: float,
    tol: float = 1e-9,
    domain: SpectrumDomain | None = None,
    cfg: SolverConfig | None = None,
) -> SpectrumPoint:
    """P*(alpha) = inf_s (-s alpha + P(s)) and the dimension of E(alpha).

    Raises EmptyLevelSet when alpha is outside [P'(-inf), P'(+inf)].
    """
    alpha = float(alpha)
    if domain is None:
        domain = spectrum_domain(p, cfg=cfg)
    tol_lo, tol_hi = domain.endpoint_tol(tol)
    norm = _normalizer(p)

    if p.is_constant:
        if abs(alpha - p.alpha_min) > tol:
            raise EmptyLevelSet(f"alpha={alpha} outside the one-point domain {{{p.alpha_min}}}")
        P0 = p.q ** (p.ell - 1) * math.log(p.m)
        return SpectrumPoint(alpha, 0.0, P0, P0, P0 / norm)
    if alpha < domain.lower - tol_lo or alpha > domain.upper + tol_hi:
        raise EmptyLevelSet(f"alpha={alpha} outside [{domain.lower}, {domain.upper}]")
    for est, etol in ((domain.lower_estimate, tol_lo), (domain.upper_estimate, tol_hi)):
        if abs(alpha - est.value) <= etol:
            val = est.legendre
            return SpectrumPoint(alpha, math.copysign(math.inf, est.s), est.pressure, val, val / norm)

    def g(s):
        return derivative_and_pressure(p, s, cfg=cfg)[0] - alpha

    lo, hi = -ENDPOINT_S0, ENDPOINT_S0
    while g(lo) > 0:
        lo *= 2
        if lo < domain.lower_estimate.s:
            lo = domain.lower_estimate.s
            break
    while g(hi) < 0:
        hi *= 2
        if hi > domain.upper_estimate.s:
            hi = domain.upper_estimate.s
            break
    s_star = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    d, P = derivative_and_pressure(p, s_star, cfg=cfg)
    val = -s_star * alpha + P
    return SpectrumPoint(alpha, s_star, P, val, val / norm)


def spectrum_curve(
    p: Potential, alphas: Iterable[float], tol: float = 1e-9, cfg: SolverConfig | None = None, threads: int = 1
) -> list[SpectrumPoint]:
    domain = spectrum_domain(p, cfg=cfg)

    def one(a):
        try:
            return legendre(p, a, tol, domain, cfg)
        except EmptyLevelSet:
            nan = math.nan
            return SpectrumPoint(float(a), nan, nan, nan, nan, empty=True)

    alphas = list(alphas)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, alphas))
    return [one(a) for a in alphas]


def translate_pressure_check(p: Potential, beta: float, s: float, cfg: SolverConfig | None = None) -> float:
    """|P_phi(s) - beta s - P_{phi - beta}(s)|."""
    a = pressure(solve_fixed_point(p, s, cfg))
    b = pressure(solve_fixed_point(p.shifted(beta), s, cfg))
    return abs(a - beta * s - b)
