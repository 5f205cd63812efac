"""Finite-dimensional l_p spaces and their geometry.

Vectors and dual functionals are plain 1-D numpy arrays.  An :class:`LpSpace`
carries the dimension and the exponent, validates operands, and provides the
geometric operations the solvers and checkers build on: the norm, the dual
(l_q) norm, the duality map x -> (x)*, the directional derivative of the
norm, sphere/ball membership predicates, and the modulus of uniform
convexity.

A dual functional f acts on a vector x through the coordinate dot product
``f @ x`` and its size is measured with the conjugate exponent q = p/(p-1).
The duality map returns the unique f with ``f(x) = ||x||^2`` and
``||f||_q = ||x||``; uniqueness needs 1 < p < inf, which the constructor
enforces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DimensionMismatch

__all__ = ["LpSpace", "lp_norm", "abs_pow"]

GEOMETRY_TOL = 1e-9


def abs_pow(a, p):
    """|a|**p with fast paths for the exponents used in hot loops."""
    a = np.abs(a)
    if p == 2.0:
        return a * a
    if p == 3.0:
        return a * a * a
    if p == 1.5:
        return a * np.sqrt(a)
    if p == 4.0:
        a2 = a * a
        return a2 * a2
    return a**p


def lp_norm(a, p, axis=-1):
    """l_p norm along ``axis``, overflow-safe by factoring out the max."""
    a = np.abs(np.asarray(a, dtype=float))
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(m > 0.0, m, 1.0)
    out = np.sum(abs_pow(a / safe, p), axis=axis) ** (1.0 / p) * np.squeeze(safe, axis=axis)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class LpSpace:
    """R^d with the l_p norm, restricted to 1 < p < inf.

    The exponent range is a standing hypothesis, not a convenience: these
    spaces are smooth and uniformly convex, which makes the duality map
    single-valued and the minimal-vector optimality certificates meaningful.
    p = 1 and p = inf are rejected.
    """

    d: int
    p: float

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or int(self.d) < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        p = float(self.p)
        if not (math.isfinite(p) and p > 1.0):
            raise ValueError(f"exponent must lie strictly inside (1, inf), got {self.p!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", p)

    @property
    def q(self) -> float:
        """Conjugate exponent: 1/p + 1/q = 1."""
        return self.p / (self.p - 1.0)

    # -- operand validation -------------------------------------------------

    def check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(
                f"expected a vector of shape ({self.d},), got {x.shape}"
            )
        return x

    # -- norms and duality --------------------------------------------------

    def norm(self, x) -> float:
        """(sum |x_i|^p)^(1/p); zero iff x = 0."""
        return float(lp_norm(self.check_vector(x), self.p))

    def dual_norm(self, f) -> float:
        """Size of a functional: the l_q norm of its coordinate vector."""
        return float(lp_norm(self.check_vector(f), self.q))

    def duality_map(self, x) -> np.ndarray:
        """The norming functional (x)* with (x)*(x) = ||x||^2, ||(x)*||_q = ||x||.

        Coordinates: ||x||^(2-p) * |x_i|^(p-1) * sign(x_i).  Undefined at 0.
        """
        x = self.check_vector(x)
        m = float(np.max(np.abs(x)))
        if m == 0.0:
            raise ValueError("duality map is undefined at the zero vector")
        t = np.abs(x) / m
        nx_over_m = np.sum(abs_pow(t, self.p)) ** (1.0 / self.p)
        # ||x||^(2-p) |x_i|^(p-1) = m * (||x||/m)^(2-p) * t_i^(p-1), overflow-safe
        return np.sign(x) * abs_pow(t, self.p - 1.0) * (m * nx_over_m ** (2.0 - self.p))

    def gateaux_derivative(self, x, y) -> float:
        """Derivative of t -> ||x + t y|| at t = 0, i.e. (x)*(y) / ||x||."""
        x = self.check_vector(x)
        y = self.check_vector(y)
        f = self.duality_map(x)
        return float(f @ y) / self.norm(x)

    # -- spheres and balls --------------------------------------------------

    def on_sphere(self, x0, eps, w, tol=GEOMETRY_TOL) -> bool:
        """| ||x0 - w|| - eps | <= tol."""
        x0 = self.check_vector(x0)
        w = self.check_vector(w)
        return bool(abs(self.norm(x0 - w) - eps) <= tol)

    def in_ball(self, x0, eps, w, tol=GEOMETRY_TOL) -> bool:
        """||x0 - w|| <= eps + tol."""
        x0 = self.check_vector(x0)
        w = self.check_vector(w)
        return bool(self.norm(x0 - w) <= eps + tol)

    # -- sampling helpers ---------------------------------------------------

    def random_unit_vector(self, rng: np.random.Generator) -> np.ndarray:
        """Gaussian direction normalized to the unit sphere of this space."""
        while True:
            g = rng.standard_normal(self.d)
            n = lp_norm(g, self.p)
            if n > 1e-12:
                return g / n

    def sphere_point(self, x0, eps, direction) -> np.ndarray:
        """The point x0 + eps * direction/||direction|| on S(x0, eps)."""
        x0 = self.check_vector(x0)
        direction = self.check_vector(direction)
        n = lp_norm(direction, self.p)
        if n == 0.0:
            raise ValueError("direction must be nonzero")
        return x0 + (eps / n) * direction

    # -- modulus of uniform convexity ----------------------------------------

    def modulus_of_convexity(self, eps, *, grid=1024, circle=1024) -> float:
        """delta(eps) = inf{1 - ||(x+y)/2|| : ||x|| = ||y|| = 1, ||x-y|| >= eps}.

        Computed by brute force on a 2-D coordinate section, where the
        infimum is attained for l_p norms: a grid scan over pairs on the
        planar unit circle followed by golden-section refinement.  For d = 1
        the sphere is the two-point set {-1, +1}; the only admissible pairs
        are antipodal and the modulus is 1 by convention.
        """
        eps = float(eps)
        if not (0.0 < eps <= 2.0):
            raise ValueError(f"eps must lie in (0, 2], got {eps}")
        if self.d == 1:
            return 1.0
        return _modulus_bruteforce(self.p, eps, int(grid), int(circle))


def _unit_circle(theta, p):
    """Points of the planar l_p unit circle at the given angle parameters."""
    theta = np.asarray(theta, dtype=float)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return pts / np.asarray(lp_norm(pts, p, axis=-1))[..., None]


def _pair_geometry(s, tau, p):
    """Distance and midpoint norm for the circle pair (u(s), u(s + tau))."""
    u = _unit_circle(np.asarray(s, dtype=float), p)
    v = _unit_circle(np.asarray(s, dtype=float) + np.asarray(tau, dtype=float), p)
    return lp_norm(u - v, p), lp_norm((u + v) / 2.0, p)


def _max_mid_at_distance(s, eps, p, n_tau=512):
    """Largest midpoint norm over pairs (u(s), u(s+tau)) at distance exactly eps."""
    taus = np.linspace(0.0, np.pi, n_tau + 1)[1:]
    dist, mid = _pair_geometry(np.full_like(taus, s), taus, p)
    g = dist - eps
    best = -np.inf
    # refine every sign-change bracket; the curve starts at distance 0
    idx = list(np.nonzero(np.diff(np.sign(g)) != 0)[0])
    if g[0] >= 0.0:
        best = max(best, float(mid[0]))
        try:
            tau_star = brentq(
                lambda t: float(_pair_geometry(s, t, p)[0]) - eps, 1e-13, taus[0],
                xtol=1e-14,
            )
            best = max(best, float(_pair_geometry(s, tau_star, p)[1]))
        except ValueError:
            pass
    for i in idx:
        lo, hi = taus[i], taus[i + 1]
        try:
            tau_star = brentq(
                lambda t: float(_pair_geometry(s, t, p)[0]) - eps, lo, hi, xtol=1e-14
            )
        except ValueError:
            continue
        best = max(best, float(_pair_geometry(s, tau_star, p)[1]))
    if not np.isfinite(best):
        # distance never reaches eps on the grid interior; the antipodal pair
        # (tau = pi, distance 2) is always admissible when eps <= 2
        best = float(mid[-1])
    return best


def _boundary_mid_approx(sb, taus, eps, p):
    """Per-row approximate max midpoint norm on the distance-eps boundary.

    Linear interpolation of (distance, midnorm) across the tau cells where
    the distance crosses eps; used only to rank candidate rows, so the
    O(h^2) interpolation error is harmless.
    """
    dist, mid = _pair_geometry(sb[:, None], taus[None, :], p)
    g = dist - eps
    left, right = g[:, :-1], g[:, 1:]
    cross = np.signbit(left) != np.signbit(right)
    denom = np.where(cross, left - right, 1.0)
    t = np.where(cross, left / denom, 0.0)
    interp = mid[:, :-1] + t * (mid[:, 1:] - mid[:, :-1])
    vals = np.where(cross, interp, -np.inf).max(axis=1)
    # a row whose first grid point is already feasible has its boundary
    # before taus[0]; the midpoint there is near 1, keep it as candidate
    vals = np.where(g[:, 0] >= 0.0, np.maximum(vals, mid[:, 0]), vals)
    return vals


@lru_cache(maxsize=512)
def _modulus_bruteforce(p, eps, n_grid, n_circle):
    if eps >= 2.0 - 1e-14:
        return 1.0  # only (numerically) antipodal pairs qualify; midpoint is 0
    ss = np.linspace(0.0, np.pi, n_grid, endpoint=False)
    taus = np.linspace(0.0, np.pi, n_circle + 1)[1:]
    approx = np.empty(n_grid)
    chunk = max(1, int(2**20 / max(n_circle, 1)))
    for start in range(0, n_grid, chunk):
        sb = ss[start : start + chunk]
        approx[start : start + chunk] = _boundary_mid_approx(sb, taus, eps, p)
    order = np.argsort(approx)[::-1]
    candidates = []
    for i in order:
        if len(candidates) >= 5:
            break
        if all(min(abs(i - j), n_grid - abs(i - j)) > 4 for j in candidates):
            candidates.append(int(i))
    h = np.pi / n_grid
    best_mid = -np.inf
    exact = {i: _max_mid_at_distance(ss[i], eps, p) for i in candidates}
    candidates.sort(key=lambda i: -exact[i])
    for i in candidates[:2]:
        res = minimize_scalar(
            lambda s: -_max_mid_at_distance(s, eps, p),
            bounds=(ss[i] - 2.0 * h, ss[i] + 2.0 * h), method="bounded",
            options={"xatol": 1e-10},
        )
        best_mid = max(best_mid, -float(res.fun), exact[i])
    return float(min(max(1.0 - best_mid, 0.0), 1.0))
