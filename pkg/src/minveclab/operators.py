"""Dense operator matrices and the machinery built around them.

Operators are plain square numpy arrays.  This module provides the example
zoo (the triangular cumulative-sum operator, nilpotent shifts, weighted
shifts), power application, certified upper bounds on induced l_p norms,
lower estimates by nonlinear power iteration, commutant bases via the
Sylvester null space, and quasi-nilpotency diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .banach import LpSpace, abs_pow, lp_norm
from .errors import DimensionMismatch

__all__ = [
    "as_operator",
    "apply",
    "apply_power",
    "power_matrix",
    "identity",
    "volterra",
    "jordan_nilpotent",
    "weighted_shift",
    "has_dense_range",
    "spectral_radius",
    "power_norm_upper_bound",
    "operator_norm_estimate",
    "CommutantBasis",
    "commutant_basis",
    "QuasinilpotencyProfile",
    "quasinilpotency_profile",
    "parse_operator_spec",
]


def as_operator(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValueError("operator entries must be finite")
    return Q


def apply(Q, x) -> np.ndarray:
    Q = as_operator(Q)
    x = np.asarray(x, dtype=float)
    if x.shape != (Q.shape[0],):
        raise DimensionMismatch(
            f"operator of dimension {Q.shape[0]} applied to vector of shape {x.shape}"
        )
    return Q @ x


def apply_power(Q, n, x) -> np.ndarray:
    """Q^n x by repeated application; Q^n is never formed here."""
    if n < 1:
        raise ValueError(f"power must be a positive integer, got {n}")
    y = apply(Q, x)
    for _ in range(int(n) - 1):
        y = Q @ y
    return y


def power_matrix(Q, n, *, flop_budget=1e9) -> np.ndarray:
    """Explicit Q^n, guarded by an n*d^3 cost budget."""
    Q = as_operator(Q)
    if n < 1:
        raise ValueError(f"power must be a positive integer, got {n}")
    d = Q.shape[0]
    if n * d**3 > flop_budget:
        raise ValueError(
            f"forming Q^{n} explicitly at dimension {d} exceeds the flop budget"
        )
    return np.linalg.matrix_power(Q, int(n))


# -- zoo ---------------------------------------------------------------------

def identity(d) -> np.ndarray:
    return np.eye(int(d))


def volterra(d) -> np.ndarray:
    """Lower-triangular trapezoidal cumulative-sum operator on d points.

    Entries h below the diagonal and h/2 on it, h = 1/d.  Invertible, with
    all eigenvalues equal to h/2, so the spectral radius is 1/(2d): a handy
    invertible stand-in for an operator whose power norms collapse fast.
    """
    d = int(d)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    h = 1.0 / d
    return np.tril(np.full((d, d), h), -1) + np.eye(d) * (h / 2.0)


def jordan_nilpotent(d) -> np.ndarray:
    """Subdiagonal of ones; nilpotent of index exactly d."""
    d = int(d)
    if d < 2:
        raise ValueError("jordan_nilpotent needs dimension >= 2")
    return np.diag(np.ones(d - 1), -1)


def weighted_shift(weights) -> np.ndarray:
    """Subdiagonal shift with the given positive weights (dimension len+1)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-D sequence")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return np.diag(w, -1)


# -- range, spectrum, norm bounds ---------------------------------------------

def has_dense_range(Q, *, rel_threshold=1e-12) -> bool:
    """In finite dimensions dense range means surjective means invertible."""
    Q = as_operator(Q)
    s = np.linalg.svd(Q, compute_uv=False)
    return bool(s[-1] > rel_threshold * s[0]) if s[0] > 0 else False


def spectral_radius(Q) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(as_operator(Q)))))


def power_norm_upper_bound(Q, n, space: LpSpace) -> float:
    """Certified upper bound on the induced norm ||Q^n||_{p->p}.

    p = 2: the largest singular value of the explicit power (exact).
    Otherwise the interpolation bound ||A||_p <= ||A||_1^(1/p) ||A||_inf^(1-1/p)
    on A = Q^n, from the maximum column and row sums.
    """
    Q = as_operator(Q)
    if Q.shape[0] != space.d:
        raise DimensionMismatch("operator dimension does not match the space")
    A = power_matrix(Q, n)
    if space.p == 2.0:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    n1 = float(np.max(np.sum(np.abs(A), axis=0)))   # max column sum = ||A||_1
    ninf = float(np.max(np.sum(np.abs(A), axis=1)))  # max row sum = ||A||_inf
    t = 1.0 / space.p
    return n1**t * ninf ** (1.0 - t)


def operator_norm_estimate(Q, space: LpSpace, *, n_starts=8, max_iter=200,
                           tol=1e-13, seed=0):
    """Attained lower estimate of ||Q||_{p->p} with a maximizing unit vector.

    Exact for p = 2 (top singular pair).  For general p this is the
    nonlinear power iteration on x -> sign-power duals, run from several
    starts (coordinate vectors, the l_2 maximizer, random directions); the
    iteration never decreases ||Qx||_p / ||x||_p, and on matrices with a
    nonnegative maximizer it converges to the true norm.  The result is a
    certified lower bound in all cases: the returned vector attains it.
    """
    Q = as_operator(Q)
    d = Q.shape[0]
    if d != space.d:
        raise DimensionMismatch("operator dimension does not match the space")
    p, q = space.p, space.q
    U, s, Vt = np.linalg.svd(Q)
    if p == 2.0:
        return float(s[0]), Vt[0].copy()
    rng = np.random.default_rng(seed)
    starts = [Vt[0].copy(), np.abs(Vt[0]) + 1e-12, np.ones(d)]
    starts.extend(np.eye(d)[j] for j in range(min(d, 4)))
    while len(starts) < 3 + min(d, 4) + n_starts:
        starts.append(rng.standard_normal(d))
    best_val, best_x = -np.inf, None
    for x in starts:
        nx = lp_norm(x, p)
        if nx == 0:
            continue
        x = x / nx
        val = 0.0
        for _ in range(max_iter):
            y = Q @ x
            ny = lp_norm(y, p)
            if ny == 0.0:
                break
            val = ny
            z = Q.T @ (np.sign(y) * abs_pow(y, p - 1.0))
            nz = lp_norm(z, q)
            if nz <= (z @ x) * (1.0 + tol):
                break
            x_new = np.sign(z) * abs_pow(z, q - 1.0)
            x_new /= lp_norm(x_new, p)
            if lp_norm(x_new - x, p) <= tol:
                x = x_new
                break
            x = x_new
        if val > best_val:
            best_val, best_x = val, x
    if best_x is None:
        return 0.0, np.eye(d)[0]
    return float(best_val), best_x


# -- commutant -----------------------------------------------------------------

@dataclass
class CommutantBasis:
    """Orthonormal (Frobenius) basis of the numerical null space of T -> QT - TQ."""

    mats: list = field(repr=False)
    dim: int = 0
    residuals: np.ndarray = field(default=None, repr=False)
    threshold: float = 0.0

    def __iter__(self):
        return iter(self.mats)

    def __len__(self):
        return self.dim


def commutant_basis(Q, *, rtol=1e-10) -> CommutantBasis:
    """Basis of {T : QT = TQ} by SVD of the d^2 x d^2 Sylvester matrix.

    Keeps right singular vectors with sigma <= rtol * ||Q||_F, which makes
    every returned T satisfy ||QT - TQ||_F <= rtol * ||Q||_F * ||T||_F by
    construction.  Dense d^2 SVD: cost grows like d^6, fine up to d ~ 100.
    """
    Q = as_operator(Q)
    d = Q.shape[0]
    froQ = float(np.linalg.norm(Q))
    eye = np.eye(d)
    M = np.kron(eye, Q) - np.kron(Q.T, eye)
    sv, Vt = sla.svd(M, full_matrices=False, lapack_driver="gesdd")[1:]
    cut = rtol * max(froQ, np.finfo(float).tiny)
    keep = sv <= cut
    mats = [Vt[i].reshape(d, d, order="F") for i in np.nonzero(keep)[0]]
    if not mats:
        raise RuntimeError("commutant computation produced an empty basis")
    residuals = np.array([np.linalg.norm(Q @ T - T @ Q) for T in mats])
    return CommutantBasis(mats=mats, dim=len(mats), residuals=residuals, threshold=cut)


def commutation_residual(Q, T) -> float:
    """Relative Frobenius size of QT - TQ."""
    Q = as_operator(Q)
    T = as_operator(T)
    if T.shape != Q.shape:
        raise DimensionMismatch("commutant candidate has a different dimension")
    denom = max(np.linalg.norm(Q) * np.linalg.norm(T), np.finfo(float).tiny)
    return float(np.linalg.norm(Q @ T - T @ Q) / denom)


# -- quasi-nilpotency diagnostics ----------------------------------------------

@dataclass
class QuasinilpotencyProfile:
    """Power-norm bound table and the effective horizon.

    ``root_bounds[i]`` is (bound on ||Q^n||_p)^(1/n) for n = powers[i].  The
    effective horizon is the largest n up to which that sequence is still
    strictly decreasing: finite invertible matrices cannot be quasi-nilpotent,
    so decay diagnostics are only meaningful on that initial window.
    """

    powers: np.ndarray
    norm_bounds: np.ndarray
    root_bounds: np.ndarray
    spectral_radius: float
    effective_horizon: int

    def to_dict(self):
        return {
            "powers": [int(n) for n in self.powers],
            "norm_bounds": [float(v) for v in self.norm_bounds],
            "root_bounds": [float(v) for v in self.root_bounds],
            "spectral_radius": float(self.spectral_radius),
            "effective_horizon": int(self.effective_horizon),
        }


def quasinilpotency_profile(Q, space: LpSpace, n_max) -> QuasinilpotencyProfile:
    Q = as_operator(Q)
    powers = np.arange(1, int(n_max) + 1)
    bounds = np.array([power_norm_upper_bound(Q, int(n), space) for n in powers])
    roots = bounds ** (1.0 / powers)
    horizon = 1
    for i in range(1, len(roots)):
        if roots[i] < roots[i - 1]:
            horizon = i + 1
        else:
            break
    return QuasinilpotencyProfile(
        powers=powers,
        norm_bounds=bounds,
        root_bounds=roots,
        spectral_radius=spectral_radius(Q),
        effective_horizon=horizon,
    )


# -- zoo addressing -------------------------------------------------------------

def parse_operator_spec(text: str) -> np.ndarray:
    """Operator from a zoo spec: volterra:d, jordan:d, wshift:w1,w2,..,
    identity:d, or file:path (dense CSV, row-major, d inferred)."""
    name, sep, arg = text.partition(":")
    name = name.strip().lower()
    if not sep:
        raise ValueError(f"operator spec {text!r} is missing ':<arg>'")
    if name == "volterra":
        return volterra(int(arg))
    if name == "jordan":
        return jordan_nilpotent(int(arg))
    if name == "identity":
        return identity(int(arg))
    if name == "wshift":
        weights = [float(v) for v in arg.split(",") if v.strip()]
        return weighted_shift(weights)
    if name == "file":
        data = np.loadtxt(arg, delimiter=",", ndmin=2)
        return as_operator(data)
    raise ValueError(f"unknown operator spec {text!r}")
