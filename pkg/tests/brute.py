"""Slow reference implementations used as test oracles."""
import itertools
import math

import numpy as np

from multiergodic.potential import word_index


def periodic_word_hits(values, m, ell, target, max_period=None, literal_limit=4096):
    """Is there a periodic word of period <= max_period whose every ell-window has phi = target?

    Periods p with m**p <= literal_limit are searched by listing every word of
    length p.  Longer periods are decided by counting closed walks of length p
    in the window graph, trace(A^p) > 0, with A built from the windows directly.
    Returns a witness period when the literal search finds one, True when only
    the walk count does, and None otherwise.
    """
    hit = np.asarray(values) == target
    P = max_period or m**ell
    for p in range(1, P + 1):
        if m**p > literal_limit:
            break
        for w in itertools.product(range(m), repeat=p):
            ext = list(w) * (ell // p + 2)
            if all(hit[word_index(ext[k : k + ell], m)] for k in range(p)):
                return tuple(w)
    else:
        return None
    r = ell - 1
    M = m**r
    A = np.zeros((M, M), dtype=bool)
    for w in itertools.product(range(m), repeat=ell):
        if hit[word_index(w, m)]:
            A[word_index(w[:r], m), word_index(w[1:], m)] = True
    Ak = np.eye(M, dtype=bool)
    for k in range(1, P + 1):
        Ak = (Ak.astype(np.int64) @ A.astype(np.int64)) > 0
        if k >= p and Ak.diagonal().any():
            return True
    return None


def window_sequence_ok(values, m, ell, target, period):
    w = list(period) * (ell + 2)
    return all(values[word_index(w[k : k + ell], m)] == target for k in range(len(period)))


def bernoulli_invariant_grid(f, g, alpha, step=1e-4):
    """F_inv for m = 2 by scanning p in [0, 1] and refining sign changes of (E f)(E g) - alpha."""
    from scipy.optimize import brentq

    f = np.asarray(f, float)
    g = np.asarray(g, float)

    def G(p):
        return ((1 - p) * f[0] + p * f[1]) * ((1 - p) * g[0] + p * g[1]) - alpha

    def H(p):
        return -sum(v * math.log(v) for v in (p, 1 - p) if v > 0) / math.log(2)

    ps = np.linspace(0, 1, int(round(1 / step)) + 1)
    vals = G(ps)
    roots = [float(p) for p, v in zip(ps, vals) if v == 0]
    for a, b, va, vb in zip(ps[:-1], ps[1:], vals[:-1], vals[1:]):
        if va * vb < 0:
            roots.append(brentq(G, a, b, xtol=1e-15))
    # tangential contacts: local minima of |G| that touch zero
    absg = np.abs(vals)
    for k in range(1, len(ps) - 1):
        if absg[k] <= absg[k - 1] and absg[k] <= absg[k + 1] and absg[k] < 1e-6:
            from scipy.optimize import minimize_scalar

            r = minimize_scalar(lambda p: abs(G(p)), bounds=(ps[k - 1], ps[k + 1]), method="bounded", options={"xatol": 1e-14})
            if abs(G(r.x)) < 1e-12:
                roots.append(float(r.x))
    if not roots:
        return None
    return max(H(p) for p in roots)


def simplex_invariant_grid(f, g, alpha, step=2e-3):
    """F_inv for m = 3: for each p_0 on a grid, refine sign changes along p_1."""
    from scipy.optimize import brentq

    F = np.column_stack([f, g]).astype(float)

    def G(p0, p1):
        p = np.array([p0, p1, 1 - p0 - p1])
        b = p @ F
        return b[0] * b[1] - alpha

    def H(p):
        p = np.asarray(p)
        p = p[p > 0]
        return float(-(p * np.log(p)).sum() / math.log(3))

    best = None
    for p0 in np.arange(0, 1 + 1e-12, step):
        top = 1 - p0
        p1s = np.linspace(0, top, max(2, int(top / step) + 1))
        P = np.column_stack([np.full_like(p1s, p0), p1s, top - p1s])
        B = P @ F
        vals = B[:, 0] * B[:, 1] - alpha
        for a, b, va, vb in zip(p1s[:-1], p1s[1:], vals[:-1], vals[1:]):
            if va == 0:
                cand = H([p0, a, 1 - p0 - a])
            elif va * vb < 0:
                r = brentq(lambda t: G(p0, t), a, b, xtol=1e-15)
                cand = H([p0, r, max(0.0, 1 - p0 - r)])
            else:
                continue
            best = cand if best is None else max(best, cand)
    return best


def all_patterns(n):
    return itertools.product((0, 1), repeat=n)
