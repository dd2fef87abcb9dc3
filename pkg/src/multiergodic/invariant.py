"""Invariant spectrum for product potentials phi(x, y) = f(x_1) g(y_1), ell = 2.

F_inv(alpha) is computed as the largest entropy (in units of log m) of a
Bernoulli measure p whose means satisfy (sum p_i f_i) * (sum p_i g_i) = alpha.

Inner problem: maximum entropy with prescribed means of the features
F_i = (f_i, g_i).  The maximizer is p_i proportional to exp(t . F_i) on the
minimal face of conv{F_i} containing the target, so we first locate that face
geometrically and then solve the (strictly convex) dual on it.

Outer problem: the target runs over the hyperbola beta_1 beta_2 = alpha.  Its
feasible part is cut out exactly by intersecting the hyperbola with the hull
edges; each feasible arc is then searched by grid plus bounded refinement.
When the feature points are collinear the feasible set is at most two points,
found by solving a quadratic.

The value is the constrained supremum over Bernoulli measures.  It is
reported whether or not E(alpha) carries an ergodic measure; in the latter
case it is only an upper bound.  Alphas no Bernoulli measure can reach come
back with feasible=False and value nan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import ConvexHull

from .potential import Potential, ShiftParams

_GEOM_TOL = 1e-12


class Infeasible(ValueError):
    """The requested means are outside the convex hull of the feature points."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class ProductPotential:
    m: int
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).ravel()
        g = np.asarray(self.g, dtype=float).ravel()
        if f.size != self.m or g.size != self.m:
            raise ValueError(f"f and g need {self.m} entries")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValueError("f and g must be finite")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    def to_potential(self, q: int = 2) -> Potential:
        return Potential(ShiftParams(self.m, q, 2), np.outer(self.f, self.g).ravel())

    @classmethod
    def from_potential(cls, p: Potential, rtol: float = 1e-10) -> "ProductPotential":
        """Rank-one factorization phi(i, j) = f(i) g(j) of an ell = 2 potential."""
        if p.ell != 2:
            raise ValueError("product factorization needs ell = 2")
        A = p.table()
        U, S, Vt = np.linalg.svd(A)
        if S[0] == 0:
            return cls(p.m, np.zeros(p.m), np.zeros(p.m))
        if S.size > 1 and S[1] > rtol * S[0]:
            raise ValueError("potential is not of the form f(x) g(y)")
        f = U[:, 0] * S[0]
        g = Vt[0]
        # keep a deterministic sign
        if g[np.argmax(np.abs(g))] < 0:
            f, g = -f, -g
        return cls(p.m, f, g)


@dataclass(frozen=True)
class InvariantPoint:
    alpha: float
    value: float
    maximizer: np.ndarray | None
    feasible: bool


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum()) + 0.0  # no -0.0 for point masses


def _lse(z: np.ndarray) -> float:
    # small vectors in a hot loop; scipy's logsumexp overhead dominates here
    zmax = float(z.max())
    return zmax + math.log(float(np.exp(z - zmax).sum()))


def _gibbs(F: np.ndarray, t: np.ndarray) -> np.ndarray:
    z = F @ t
    return np.exp(z - _lse(z))


def _solve_dual_1d(x: np.ndarray, b: float) -> np.ndarray:
    # E_t x is strictly increasing in t; bracket and bisect
    def g(t):
        return float(_gibbs(x[:, None], np.array([t])) @ x) - b

    span = float(x.max() - x.min())
    lo, hi = -1.0 / span, 1.0 / span
    while g(lo) > 0:
        lo *= 2
    while g(hi) < 0:
        hi *= 2
    t = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return _gibbs(x[:, None], np.array([t]))


def _solve_dual(F: np.ndarray, beta: np.ndarray, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """p_i ~ exp(t.F_i) with E_p F = beta, by damped Newton on the convex dual.

    Requires beta in the relative interior of conv(F) and F of full affine rank.
    A stalled line search is accepted once the moment residual is at roundoff
    level (1e-9 relative), which happens when beta hugs the boundary.
    """
    d = F.shape[1]
    if d == 1:
        return _solve_dual_1d(F[:, 0], float(beta[0]))
    t = np.zeros(d)
    scale = max(1.0, float(np.abs(F).max()))

    def dual(t):
        return _lse(F @ t) - float(t @ beta)

    val = dual(t)
    res = np.inf
    for _ in range(max_iter):
        p = _gibbs(F, t)
        mean = p @ F
        grad = mean - beta
        res = float(np.max(np.abs(grad)))
        if res <= tol * scale:
            return p
        C = (F - mean).T @ ((F - mean) * p[:, None])
        try:
            step = np.linalg.solve(C, -grad)
        except np.linalg.LinAlgError:
            step = -grad
        decrement = -float(grad @ step)
        if decrement <= 1e-30:
            break  # Newton decrement at roundoff: nothing left to gain
        lam = 1.0
        while True:
            cand = t + lam * step
            cval = dual(cand)
            if cval <= val + 1e-4 * lam * float(grad @ step):
                break
            lam *= 0.5
            if lam < 1e-12:
                break
        if lam < 1e-12:
            break
        t, val = cand, cval
    p = _gibbs(F, t)
    res = float(np.max(np.abs(p @ F - beta)))
    if res <= 1e-9 * scale:
        return p
    raise ConvergenceError(f"moment matching did not converge (residual {res:.2e})", res)


def _affine_frame(F: np.ndarray, tol: float):
    """Center and orthonormal basis of the affine hull of the rows of F."""
    c = F.mean(axis=0)
    X = F - c
    if X.size == 0 or np.max(np.abs(X)) <= tol:
        return c, np.zeros((F.shape[1], 0))
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    rank = int((S > tol * max(1.0, S[0])).sum())
    return c, Vt[:rank].T


def max_entropy_moments(F, beta, tol: float = _GEOM_TOL) -> tuple[float, np.ndarray]:
    """Maximize -sum p log p subject to sum p_i F_i = beta over probability vectors p.

    F has shape (m, d).  Raises Infeasible if beta is not in conv(F).
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] == 1 and F.shape[1] != 1 and np.ndim(beta) == 0:
        F = F.T
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m = F.shape[0]
    scale = max(1.0, float(np.abs(F).max()), float(np.abs(beta).max()))
    gtol = tol * scale
    c, B = _affine_frame(F, gtol)
    off = (beta - c) - B @ (B.T @ (beta - c))
    if np.max(np.abs(off), initial=0.0) > 1e3 * gtol:
        raise Infeasible(f"target {beta.tolist()} is off the affine hull of the features")
    coords = (F - c) @ B
    b = (beta - c) @ B
    support = _minimal_face(coords, b, 1e3 * gtol)
    p = np.zeros(m)
    sub = coords[support]
    c2, B2 = _affine_frame(sub, gtol)
    if B2.shape[1] == 0:
        p[support] = 1.0 / support.size
    else:
        p[support] = _solve_dual((sub - c2) @ B2, (b - c2) @ B2)
    return _entropy(p), p


def _minimal_face(coords: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Indices of the points spanning the smallest face of the hull containing b."""
    k = coords.shape[1]
    idx = np.arange(coords.shape[0])
    if k == 0:
        return idx
    if k == 1:
        t = coords[:, 0]
        lo, hi = t.min(), t.max()
        if b[0] < lo - tol or b[0] > hi + tol:
            raise Infeasible("target outside the feature range")
        if abs(b[0] - lo) <= tol:
            return idx[np.abs(t - lo) <= tol]
        if abs(b[0] - hi) <= tol:
            return idx[np.abs(t - hi) <= tol]
        return idx
    hull = ConvexHull(coords)
    normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
    slack = normals @ b + offsets
    if np.any(slack > tol):
        raise Infeasible("target outside the convex hull of the features")
    active = np.abs(slack) <= tol
    if not active.any():
        return idx
    on_face = np.all(np.abs(coords @ normals[active].T + offsets[active]) <= tol, axis=1)
    # recurse inside the face, which has lower dimension
    face = idx[on_face]
    sub = coords[face]
    c, B = _affine_frame(sub, tol)
    return face[_minimal_face((sub - c) @ B, (b - c) @ B, tol)]


def max_entropy_given_means(f, g, beta1: float, beta2: float) -> tuple[float, np.ndarray]:
    """Largest entropy (nats) of p with sum p f = beta1 and sum p g = beta2."""
    F = np.column_stack([np.asarray(f, dtype=float), np.asarray(g, dtype=float)])
    return max_entropy_moments(F, [beta1, beta2])


def _single_constraint(h: np.ndarray, target: float):
    try:
        return max_entropy_moments(h[:, None], [target])
    except Infeasible:
        return None


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of a x^2 + b x + c, computed without cancellation."""
    if a == 0:
        return [] if b == 0 else [-c / b]
    disc = b * b - 4 * a * c
    # a negative discriminant within roundoff of zero is a tangency
    if disc < -8 * np.finfo(float).eps * max(b * b, abs(4 * a * c)):
        return []
    root = math.sqrt(max(disc, 0.0))
    qv = -0.5 * (b + math.copysign(root, b))
    if qv == 0:
        return [0.0]
    return [qv / a, c / qv]


def _best(cands):
    cands = [c for c in cands if c is not None]
    if not cands:
        return None
    return max(cands, key=lambda c: c[0])


def _collinear_candidates(F, alpha):
    # along the segment one mean is affine in the other, beta_y = k beta_x + c,
    # so beta_x (k beta_x + c) = alpha is a quadratic in the better-spread mean
    ax = 0 if np.ptp(F[:, 0]) >= np.ptp(F[:, 1]) else 1
    x, y = F[:, ax], F[:, 1 - ax]
    i, j = int(np.argmin(x)), int(np.argmax(x))
    k = (y[j] - y[i]) / (x[j] - x[i])
    c = y[i] - k * x[i]
    lo, hi = x[i], x[j]
    pad = 1e-12 * max(hi - lo, 1.0)
    out = []
    for r in _quadratic_roots(k, c, -alpha):
        if lo - pad <= r <= hi + pad:
            r = min(max(r, lo), hi)
            beta = np.empty(2)
            beta[ax], beta[1 - ax] = r, k * r + c
            try:
                out.append(max_entropy_moments(F, beta))
            except Infeasible:
                pass
    return out


def _planar_candidates(F, alpha, scale, grid: int = 64):
    hull = ConvexHull(F)
    verts = F[hull.vertices]
    lo, hi = F[:, 0].min(), F[:, 0].max()
    breaks = {lo, hi}
    nv = len(verts)
    for k in range(nv):
        P, Qp = verts[k], verts[(k + 1) % nv]
        d = Qp - P
        for t in _quadratic_roots(d[0] * d[1], P[0] * d[1] + P[1] * d[0], P[0] * P[1] - alpha):
            if -1e-12 <= t <= 1 + 1e-12:
                breaks.add(float(P[0] + min(max(t, 0.0), 1.0) * d[0]))
    if lo < 0 < hi:
        breaks.add(0.0)
    pts = sorted(b for b in breaks if lo <= b <= hi)

    def h(b1):
        if b1 == 0:
            return None
        try:
            return max_entropy_moments(F, [b1, alpha / b1])
        except (Infeasible, ConvergenceError):
            return None

    out = [h(b) for b in pts]
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 1e-14 * scale or h(0.5 * (a + b)) is None:
            continue
        xs = np.linspace(a, b, grid + 2)[1:-1]
        vals = [h(x) for x in xs]
        out.extend(vals)
        ok = [(v[0], x) for v, x in zip(vals, xs) if v is not None]
        if not ok:
            continue
        _, xbest = max(ok)
        w = (b - a) / (grid + 1)
        lo_r, hi_r = max(a, xbest - w), min(b, xbest + w)

        def neg(x):
            v = h(x)
            return -v[0] if v is not None else 1e6

        r = minimize_scalar(neg, bounds=(lo_r, hi_r), method="bounded", options={"xatol": 1e-12 * max(1.0, abs(xbest))})
        out.append(h(float(r.x)))
    return out


def invariant_spectrum(pp: ProductPotential, alpha: float, tol: float = 1e-12) -> InvariantPoint:
    """Largest Bernoulli entropy / log m with (E f)(E g) = alpha."""
    alpha = float(alpha)
    F = np.column_stack([pp.f, pp.g])
    scale = max(1.0, float(np.abs(F).max()), abs(alpha))
    log_m = math.log(pp.m)
    if alpha == 0.0:
        best = _best([_single_constraint(pp.f, 0.0), _single_constraint(pp.g, 0.0)])
    else:
        c, B = _affine_frame(F, tol * scale)
        dim = B.shape[1]
        if dim == 0:
            ok = abs(c[0] * c[1] - alpha) <= 1e-12 * scale
            best = (log_m, np.full(pp.m, 1.0 / pp.m)) if ok else None
        elif dim == 1:
            best = _best(_collinear_candidates(F, alpha))
        else:
            best = _best(_planar_candidates(F, alpha, scale))
    if best is None:
        return InvariantPoint(alpha, math.nan, None, False)
    return InvariantPoint(alpha, best[0] / log_m, best[1], True)


def invariant_curve(pp: ProductPotential, alphas) -> list[InvariantPoint]:
    return [invariant_spectrum(pp, a) for a in alphas]
