import math

import numpy as np
import pytest

from brute import periodic_word_hits, window_sequence_ok
from conftest import EXAMPLE1, EXAMPLE2, EXAMPLE3, random_corpus
from multiergodic.potential import Potential
from multiergodic.pressure import (
    EmptyLevelSet,
    EndpointError,
    derivative_and_pressure,
    derivative_at_infinity,
    endpoint_estimate,
    extremal_attained,
    fd_derivative,
    legendre,
    ruelle_derivative,
    spectrum_curve,
    spectrum_domain,
    translate_pressure_check,
)

# fixed point of the limiting system at s -> -infinity for the first example
T_PLASTIC = 1.3247179572447460  # real root of t^3 = t + 1


def P1(values):
    return Potential.from_values(2, 2, 2, values)


def test_ruelle_examples():
    assert abs(ruelle_derivative(P1(EXAMPLE2), 1.0) - math.tanh(1.0)) <= 1e-10
    assert abs(ruelle_derivative(P1(EXAMPLE1), 0.0) - 0.25) <= 1e-10
    assert abs(ruelle_derivative(P1(EXAMPLE3), 0.0)) <= 1e-12


def test_ruelle_example3_closed_form():
    p = P1(EXAMPLE3)
    for s in (-2.0, -0.5, 1.0, 3.0):
        a, b = math.exp(s / 2), math.exp(-s / 2)
        assert abs(ruelle_derivative(p, s) - 0.5 * (a - b) / (2 + a + b)) <= 1e-10


def test_fd_examples():
    assert abs(fd_derivative(P1(EXAMPLE2), 1.0) - math.tanh(1.0)) <= 1e-8
    for p in random_corpus(3, 5):
        assert abs(fd_derivative(p, 0.0) - p.values.mean()) <= 1e-7
    c = Potential.from_values(3, 2, 2, [0.4] * 9)
    for s in (-2.0, 0.0, 3.0):
        assert abs(fd_derivative(c, s) - 0.4) <= 1e-8
    with pytest.raises(ValueError):
        fd_derivative(c, 0.0, h=0)


def test_ruelle_matches_fd_small():
    for p in random_corpus(8, 15):
        for s in (-2.0, 0.0, 2.0):
            assert abs(ruelle_derivative(p, s) - fd_derivative(p, s)) <= 1e-6


@pytest.mark.parametrize(
    "values, lo, hi, tol",
    [(EXAMPLE2, -1, 1, 1e-6), (EXAMPLE3, -0.5, 0.5, 1e-6), (EXAMPLE1, 0, 1, 1e-4)],
)
def test_derivative_at_infinity(values, lo, hi, tol):
    p = P1(values)
    assert abs(derivative_at_infinity(p, -1) - lo) <= tol
    assert abs(derivative_at_infinity(p, +1) - hi) <= tol


def test_endpoint_nonconvergence_reported():
    p = P1(EXAMPLE1)
    with pytest.raises(EndpointError) as ei:
        derivative_at_infinity(p, -1, tol=1e-300)
    assert ei.value.estimate is not None and not ei.value.estimate.converged


def test_extremal_examples():
    assert extremal_attained(P1(EXAMPLE1), "min") == (True, (0,))
    assert extremal_attained(P1(EXAMPLE3), "min") == (False, None)
    assert extremal_attained(P1(EXAMPLE3), "max") == (False, None)
    ok, w = extremal_attained(P1(EXAMPLE2), "max")
    assert ok and w in {(0,), (1,)}
    with pytest.raises(ValueError):
        extremal_attained(P1(EXAMPLE2), "mid")


def test_extremal_vs_brute_force():
    rng = np.random.default_rng(9)
    for _ in range(150):
        m = int(rng.choice([2, 3]))
        ell = int(rng.choice([2, 3, 4])) if m == 2 else int(rng.choice([2, 3]))
        vals = rng.integers(0, 3, m**ell).astype(float)
        p = Potential.from_values(m, 2, ell, vals)
        for which, target in (("min", p.alpha_min), ("max", p.alpha_max)):
            ok, w = extremal_attained(p, which)
            ref = periodic_word_hits(vals, m, ell, target)
            assert ok == (ref is not None)
            if ok:
                assert window_sequence_ok(vals, m, ell, target, w)


def test_domain_consistent_with_extremality():
    # attained extremum <=> endpoint equals it
    for values in (EXAMPLE1, EXAMPLE2, EXAMPLE3):
        p = P1(values)
        d = spectrum_domain(p)
        lo_tol, hi_tol = d.endpoint_tol(1e-4)
        assert d.lower_attains_min == (abs(d.lower - p.alpha_min) <= lo_tol)
        assert d.upper_attains_max == (abs(d.upper - p.alpha_max) <= hi_tol)


def test_domain_ordering_random():
    for p in random_corpus(21, 8):
        d = spectrum_domain(p)
        assert p.alpha_min - 1e-9 <= d.lower < d.upper <= p.alpha_max + 1e-9


def test_derivative_strictly_increasing():
    grid = np.linspace(-4, 4, 17)
    for p in random_corpus(31, 6):
        d = np.array([ruelle_derivative(p, s) for s in grid])
        assert np.all(np.diff(d) > 0)
    c = Potential.from_values(2, 3, 3, [1.5] * 8)
    d = np.array([ruelle_derivative(c, s) for s in grid])
    assert np.allclose(d, 1.5, atol=1e-10)


def test_legendre_examples():
    p2 = P1(EXAMPLE2)
    pt = legendre(p2, 0.0)
    assert abs(pt.s_star) <= 1e-9
    assert abs(pt.legendre - 2 * math.log(2)) <= 1e-9
    assert abs(pt.dimension - 1) <= 1e-9
    pt = legendre(p2, 1.0)
    assert abs(pt.legendre - math.log(2)) <= 1e-9 and abs(pt.dimension - 0.5) <= 1e-9
    pt = legendre(P1(EXAMPLE1), 0.0)
    oracle = 2 * math.log(T_PLASTIC**2) / (2 * math.log(2))
    assert abs(pt.dimension - oracle) <= 2e-4
    assert abs(pt.dimension - 0.81137) <= 2e-4


def test_plastic_number_oracle():
    t = T_PLASTIC
    assert abs(t**3 - t - 1) < 1e-14
    # psi(1)^2 = psi(0), psi(0)^2 = psi(0) + psi(1) solved by psi(0) = t^2, psi(1) = t
    assert abs((t**2) ** 2 - (t**2 + t)) < 1e-13


def test_spectrum_curve_examples():
    dims = [pt.dimension for pt in spectrum_curve(P1(EXAMPLE2), [-1, 0, 1])]
    assert np.allclose(dims, [0.5, 1, 0.5], atol=1e-9)
    p3 = P1(EXAMPLE3)
    assert abs(spectrum_curve(p3, [0.0])[0].dimension - 1) <= 1e-9
    out = spectrum_curve(p3, [0.9])[0]
    assert out.empty and math.isnan(out.dimension)
    with pytest.raises(EmptyLevelSet):
        legendre(p3, 0.9)


def test_legendre_consistency_random():
    rng = np.random.default_rng(4)
    for p in random_corpus(41, 6):
        d = spectrum_domain(p)
        for u in rng.uniform(0.1, 0.9, 3):
            a = d.lower + u * (d.upper - d.lower)
            pt = legendre(p, a, tol=1e-9, domain=d)
            D, P = derivative_and_pressure(p, pt.s_star)
            assert abs(D - a) <= 1e-8
            assert abs(pt.legendre - (-pt.s_star * a + P)) <= 1e-8
            assert -1e-9 <= pt.dimension <= 1 + 1e-9


def test_dimension_at_mean_is_one_small():
    for p in random_corpus(51, 10):
        a = ruelle_derivative(p, 0.0)
        assert abs(legendre(p, a).dimension - 1) <= 1e-9


def test_constant_potential_spectrum():
    c = Potential.from_values(2, 2, 3, [0.5] * 8)
    assert abs(legendre(c, 0.5).dimension - 1) <= 1e-12
    with pytest.raises(EmptyLevelSet):
        legendre(c, 0.6)


def test_translation_examples():
    p1 = P1(EXAMPLE1)
    for s in (-2.0, 0.5, 3.0):
        assert translate_pressure_check(p1, 0.0, s) == 0.0
    assert translate_pressure_check(P1(EXAMPLE2), 1.0, 2.0) <= 1e-9


def test_endpoint_legendre_monotone():
    # -sP'(s) + P(s) decreases toward the endpoint value as s grows
    p = P1(EXAMPLE3)
    vals = []
    for s in (4.0, 8.0, 16.0, 32.0):
        D, P = derivative_and_pressure(p, s)
        vals.append(-s * D + P)
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    est = endpoint_estimate(p, +1)
    assert 0 <= est.legendre <= vals[-1]
    # P*(1/2) = lim (-s/2 + log(2 + e^(s/2) + e^(-s/2))) = 0
    assert est.legendre <= 1e-6
