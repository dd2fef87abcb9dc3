"""Sampling Markov and telescopic product measures, and the LLN experiment.

Telescopic samples draw every column Lambda_i independently.  Uniforms for
column i come from a counter-based stream keyed by (seed, i): a splitmix64
finalizer applied to (seed, i, position).  A column therefore gets the same
symbols however the columns are batched or ordered.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import (
    CylinderMeasure,
    MarkovMeasure,
    TelescopicMeasure,
    markov_dimension_formula,
    markov_from_fixed_point,
)
from .potential import Potential, cell_generators_by_length, multiple_ergodic_sum
from .pressure import ruelle_derivative
from .transfer import SolverConfig, solve_fixed_point

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def keyed_uniforms(seed, keys, length: int) -> np.ndarray:
    """Uniforms in [0, 1), a pure function of (seed, key, position).

    Shape (len(keys), length) for a scalar seed; (len(seeds), len(keys), length)
    when ``seed`` is a sequence.
    """
    scalar = np.ndim(seed) == 0
    # build from Python ints: a mixed list above and below 2**63 would become float64
    seq = [seed] if scalar else list(seed)
    seeds = np.array([int(v) & 0xFFFFFFFFFFFFFFFF for v in seq], dtype=np.uint64)
    keys = np.asarray(keys, dtype=np.uint64).ravel()
    seed_words = _mix64(seeds)
    with np.errstate(over="ignore"):
        base = _mix64(keys[None, :] * _GOLDEN ^ seed_words[:, None])
        ctr = np.arange(1, length + 1, dtype=np.uint64) * _GOLDEN
        bits = _mix64(base[:, :, None] + ctr[None, None, :])
    out = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return out[0] if scalar else out


def sample_markov(mm: MarkovMeasure, length: int, seed: int) -> np.ndarray:
    """A word of the given length from a Markov measure (initial law, then kernel)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    U = np.random.default_rng(seed).random((1, length))
    return mm.sample_words(U)[0]


def sample_telescopic(tm: TelescopicMeasure, n: int, seed: int) -> np.ndarray:
    """x_1..x_n from P_mu, returned as an array with x[0] = x_1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.empty(n, dtype=np.int64)
    for k, gens in cell_generators_by_length(n, tm.q).items():
        words = tm.base.sample_words(keyed_uniforms(seed, gens, k))
        pos = gens[:, None] * tm.q ** np.arange(k)[None, :]
        x[pos - 1] = words
    return x


def sample_telescopic_batch(tm: TelescopicMeasure, n: int, seeds) -> np.ndarray:
    """Rows x_1..x_n, one per seed; row r equals sample_telescopic(tm, n, seeds[r])."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seeds = list(seeds)
    R = len(seeds)
    x = np.empty((R, n), dtype=np.int64)
    for k, gens in cell_generators_by_length(n, tm.q).items():
        U = keyed_uniforms(seeds, gens, k)
        words = tm.base.sample_words(U.reshape(-1, k)).reshape(R, gens.size, k)
        pos = gens[:, None] * tm.q ** np.arange(k)[None, :]
        x[:, pos - 1] = words
    return x


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, np.uint64)[0])


@dataclass
class LlnReport:
    n: int
    depth: int
    trials: int
    s: float
    averages: np.ndarray = field(repr=False)
    local_dims: np.ndarray = field(repr=False)
    target_average: float = math.nan
    target_dimension: float = math.nan

    @staticmethod
    def _stats(v):
        mean = float(np.mean(v))
        sd = float(np.std(v, ddof=1))
        return mean, sd, sd / math.sqrt(v.size)

    @property
    def average_stats(self):
        return self._stats(self.averages)

    @property
    def dimension_stats(self):
        return self._stats(self.local_dims)

    @property
    def average_z(self) -> float:
        mean, _, se = self.average_stats
        return (mean - self.target_average) / se if se > 0 else (0.0 if mean == self.target_average else math.inf)

    @property
    def dimension_z(self) -> float:
        mean, _, se = self.dimension_stats
        return (mean - self.target_dimension) / se if se > 0 else (0.0 if mean == self.target_dimension else math.inf)

    def rows(self):
        for t, (a, d) in enumerate(zip(self.averages, self.local_dims)):
            yield t, float(a), float(d)

    def summary(self) -> dict:
        am, asd, ase = self.average_stats
        dm, dsd, dse = self.dimension_stats
        return {
            "n": self.n,
            "depth": self.depth,
            "trials": self.trials,
            "s": self.s,
            "average_mean": am,
            "average_sd": asd,
            "average_target": self.target_average,
            "average_z": self.average_z,
            "local_dim_mean": dm,
            "local_dim_sd": dsd,
            "local_dim_target": self.target_dimension,
            "local_dim_z": self.dimension_z,
        }

    def to_text(self) -> str:
        lines = [f"{k}: {v!r}" for k, v in self.summary().items()]
        lines.append("trial,average,local_dimension")
        lines += [f"{t},{a:.15g},{d:.15g}" for t, a, d in self.rows()]
        return "\n".join(lines) + "\n"


def lln_experiment(
    p: Potential,
    s: float,
    n: int,
    trials: int,
    seed: int,
    cfg: SolverConfig | None = None,
    threads: int = 1,
) -> LlnReport:
    """Sample P_{mu_s} repeatedly; record A_n phi and the local dimension at depth n q^(ell-1)."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    fp = solve_fixed_point(p, s, cfg)
    tm = TelescopicMeasure(markov_from_fixed_point(fp), p.q)
    depth = n * p.q ** (p.ell - 1)
    log_m = math.log(p.m)

    def one(t):
        x = sample_telescopic(tm, depth, trial_seed(seed, t))
        _, avg = multiple_ergodic_sum(p, x, n)
        return avg, -tm.log_cylinder_sequence(x) / (depth * log_m)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(one, range(trials)))
    else:
        res = [one(t) for t in range(trials)]
    res = np.array(res)
    return LlnReport(
        n=n,
        depth=depth,
        trials=trials,
        s=float(s),
        averages=res[:, 0],
        local_dims=res[:, 1],
        target_average=ruelle_derivative(p, s, cfg=cfg),
        target_dimension=markov_dimension_formula(p, s, cfg),
    )
