"""Norm-minimal preimage solver.

Given an operator Q on an l_p space, a unit vector x0 and a radius
eps in (0, 1), the problem is

    minimize ||y||_p   subject to   ||Q^n y - x0||_p <= eps.

Since ||x0|| = 1 > eps the origin is infeasible and the constraint is active
at the optimum.  Two solver paths:

* p = 2 closed form: with A = Q^n and its SVD, the stationarity system
  y = lam (I + lam A'A)^{-1} A' x0 reduces to a monotone scalar secular
  equation in lam >= 0, solved by safeguarded Newton/bisection in log-lam.

* general p in (1, inf): an inner damped Newton minimizing the penalized
  smooth functional psi(y) + mu psi(Ay - x0), psi(v) = (1/p) sum (v_i^2 +
  nu^2)^{p/2}, inside a safeguarded scalar Newton on log-mu that drives the
  constraint residual to eps (derivative by implicit differentiation).  The
  |t|^{p-2} singularities for p < 2 are regularized by nu and removed by a
  final exact-map polish.  Cold starts walk p from 2 to the target in short
  continuation steps; warm starts (sequences) skip the walk.

Every returned solution carries an optimality certificate: the active
constraint residual, the multiplier a <= 0, and the alignment residual of
g = (Q^n)*(Q^n y - x0)* against a * (y)* measured with exact duality maps
in the dual norm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .banach import LpSpace, abs_pow, lp_norm
from .errors import InfeasibleProblem, MaxIterationsExceeded
from . import operators as ops

__all__ = [
    "SolverConfig",
    "MinimalVectorProblem",
    "MinimalVectorSolution",
    "MinimalVectorSequence",
    "solve_min_vector",
    "solve_min_vector_l2",
    "min_vector_sequence",
]

UNIT_NORM_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    tol_feas: float = 1e-10
    tol_kkt: float = 1e-8
    max_iter: int = 500
    regularization: float = 1e-12
    warm_start: bool = True
    path: str = "auto"  # auto | closed_form_l2 | newton

    def __post_init__(self):
        if self.path not in ("auto", "closed_form_l2", "newton"):
            raise ValueError(f"unknown solver path {self.path!r}")


@dataclass
class MinimalVectorProblem:
    Q: np.ndarray
    x0: np.ndarray
    eps: float
    n: int
    space: LpSpace

    def __post_init__(self):
        self.Q = ops.as_operator(self.Q)
        self.x0 = self.space.check_vector(self.x0)
        if self.Q.shape[0] != self.space.d:
            raise ValueError("operator dimension does not match the space")
        nx0 = self.space.norm(self.x0)
        if abs(nx0 - 1.0) > UNIT_NORM_TOL:
            raise ValueError(
                f"x0 must be a unit vector (||x0|| = {nx0!r}); it is not normalized silently"
            )
        if not (0.0 < self.eps < 1.0):
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if int(self.n) < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        self.n = int(self.n)
        self.eps = float(self.eps)


@dataclass
class MinimalVectorSolution:
    y: np.ndarray
    norm_y: float
    feasibility_residual: float   # ||Q^n y - x0||_p - eps
    multiplier: float             # the nonpositive a with g = a f
    kkt_residual: float           # ||g - a f||_q / ||f||_q, exact duality maps
    iterations: int
    converged: bool
    path: str

    def to_dict(self, include_y=True):
        out = {
            "norm_y": float(self.norm_y),
            "feasibility_residual": float(self.feasibility_residual),
            "multiplier": float(self.multiplier),
            "kkt_residual": float(self.kkt_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "path": self.path,
        }
        if include_y:
            out["y"] = [float(v) for v in self.y]
        return out


@dataclass
class MinimalVectorSequence:
    """Solutions for n = 1..N with the norm and ratio tables.

    ``ratios[i] = norms[i] / norms[i+1]`` is the ratio ||y_{n-1}||/||y_n||
    for n = i + 2; monotonicity of the norms is not asserted anywhere.
    """

    solutions: list
    norms: np.ndarray
    ratios: np.ndarray
    eps: float
    x0: np.ndarray
    space: LpSpace
    N: int
    Q: np.ndarray = None

    def __len__(self):
        return len(self.solutions)

    def image(self, index) -> np.ndarray:
        """Q^n y_n for the stored solution at 0-based ``index`` (n = index+1)."""
        sol = self.solutions[index]
        return ops.apply_power(self.Q, index + 1, sol.y)


# -- shared numerical kernels ---------------------------------------------------


def _grad_power(v, p, nu):
    """Gradient of (1/p) sum (v^2 + nu^2)^{p/2}."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = v * (v * v + nu * nu) ** ((p - 2.0) / 2.0)
    if nu == 0.0:
        out = np.where(v == 0.0, 0.0, out)
    return out


def _hess_power(v, p, nu):
    """Second derivative of (1/p)(v^2 + nu^2)^{p/2}, capped for stability."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (v * v + nu * nu) ** ((p - 4.0) / 2.0) * ((p - 1.0) * v * v + nu * nu)
    out = np.where(np.isfinite(out), out, 1e40)
    return np.minimum(out, 1e40)


def _exact_dual(v, p):
    """sign(v) |v|^{p-1}, the unregularized gradient direction."""
    return np.sign(v) * abs_pow(v, p - 1.0)


class _Budget:
    def __init__(self, total):
        self.total = int(total)
        self.used = 0

    def charge(self, k):
        self.used += int(k)

    @property
    def exhausted(self):
        return self.used >= self.total

    def slice(self, cap=60):
        return max(6, min(cap, self.total - self.used))


def _certificate(A, y, x0, eps, space, mu):
    """Exact-map diagnostics: feasibility, multiplier, alignment residual."""
    p, q = space.p, space.q
    r = A @ y - x0
    ny = lp_norm(y, p)
    nr = lp_norm(r, p)
    f = space.duality_map(y)
    g = nr ** (2.0 - p) * (A.T @ _exact_dual(r, p))
    a = -(eps ** (2.0 - p)) * ny ** (p - 2.0) / mu if mu > 0 else 0.0
    kkt = float(lp_norm(g - a * f, q) / max(lp_norm(f, q), np.finfo(float).tiny))
    return float(nr - eps), float(a), kkt, float(ny)


# -- p = 2 closed form ------------------------------------------------------------


def _l2_core(A, x0, eps, tol=1e-13, max_iter=300):
    """Secular-equation solve; returns (y, lam, iterations).

    Raises InfeasibleProblem when the l_2 distance from x0 to range(A)
    meets or exceeds eps.
    """
    U, s, Vt = np.linalg.svd(A)
    c = U.T @ x0
    smax = s[0] if s.size else 0.0
    active = s > smax * 1e-15 if smax > 0 else np.zeros_like(s, dtype=bool)
    dist = float(np.linalg.norm(c[~active]))
    if dist >= eps - 1e-13:
        raise InfeasibleProblem(
            f"distance from x0 to range(A) is {dist:.6g} >= eps = {eps:.6g}",
            distance=dist, eps=eps,
        )
    sa, ca = s[active], c[active]
    c_out2 = dist * dist

    def resid(lam):
        return float(np.sqrt(np.sum(ca * ca / (1.0 + lam * sa * sa) ** 2) + c_out2))

    def dresid(lam):
        R = resid(lam)
        t = 1.0 + lam * sa * sa
        return float(-np.sum(ca * ca * sa * sa / (t * t * t)) / max(R, 1e-300))

    # bracket in lam: resid(0) = 1 > eps, resid(inf) = dist < eps
    lo, flo = 0.0, 1.0 - eps
    hi = 1.0 / (smax * smax)
    it = 0
    while resid(hi) > eps:
        hi *= 16.0
        it += 1
        if it > 600:
            raise InfeasibleProblem(
                "secular bracket expansion failed (numerically infeasible)",
                distance=dist, eps=eps,
            )
    lam = hi
    best = (abs(resid(lam) - eps), lam)
    for it in range(it, max_iter):
        R = resid(lam)
        err = R - eps
        if abs(err) < best[0]:
            best = (abs(err), lam)
        if abs(err) <= tol:
            break
        if err > 0:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        d = dresid(lam)
        lam_newton = lam - err / d if d < 0 else None
        if lam_newton is not None and lo < lam_newton < hi:
            lam = lam_newton
        else:
            lam = np.sqrt(max(lo, 1e-300) * hi) if lo > 0 else 0.5 * (lo + hi)
    _, lam = min((abs(resid(lam) - eps), lam), best)
    w = lam * sa * ca / (1.0 + lam * sa * sa)
    y = Vt[active].T @ w
    return y, float(lam), it + 1


def solve_min_vector_l2(problem: MinimalVectorProblem,
                        config: SolverConfig | None = None) -> MinimalVectorSolution:
    """Closed-form spectral path; requires p = 2."""
    config = config or SolverConfig()
    if problem.space.p != 2.0:
        raise ValueError("the closed-form path requires p = 2")
    A = ops.power_matrix(problem.Q, problem.n)
    y, lam, its = _l2_core(A, problem.x0, problem.eps)
    feas, a, kkt, ny = _certificate(A, y, problem.x0, problem.eps, problem.space, lam)
    return MinimalVectorSolution(
        y=y, norm_y=ny, feasibility_residual=feas, multiplier=a,
        kkt_residual=kkt, iterations=its, converged=abs(feas) <= 1e-10,
        path="closed_form_l2",
    )


# -- general p: inner primal Newton ------------------------------------------------


def _inner_newton(A, x0, p, mu, nu, y, gtol, budget: _Budget):
    """Minimize psi(y) + mu psi(Ay - x0); equilibrated Cholesky + refinement."""
    d = len(y)
    sc = 1.0 / (1.0 + mu)

    def merit(y, r):
        val = np.sum((y * y + nu * nu) ** (p / 2.0))
        val += mu * np.sum((r * r + nu * nu) ** (p / 2.0))
        return sc * val / p

    steps = budget.slice()
    converged = False
    for k in range(1, steps + 1):
        r = A @ y - x0
        gy = _grad_power(y, p, nu)
        gr = A.T @ _grad_power(r, p, nu)
        g = gy + mu * gr
        gscale = max(np.linalg.norm(gy), mu * np.linalg.norm(gr), 1e-300)
        if np.linalg.norm(g) <= gtol * gscale:
            converged = True
            break
        Hfull = np.diag(_hess_power(y, p, nu)) + mu * (A.T * _hess_power(r, p, nu)) @ A
        dg = np.sqrt(np.clip(np.diag(Hfull), 1e-300, None))
        E = 1.0 / dg
        Heq = (Hfull * E).T * E
        try:
            cf = sla.cho_factor(Heq + np.eye(d) * 1e-15, lower=True)
            step = E * sla.cho_solve(cf, E * (-g))
            # one round of iterative refinement recovers digits lost to conditioning
            step += E * sla.cho_solve(cf, E * (-g - Hfull @ step))
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Hfull, -g, rcond=None)[0]
        except Exception:
            step = np.linalg.lstsq(Hfull, -g, rcond=None)[0]
        slope = float(g @ step)
        if slope >= 0.0:
            step, slope = -g, -float(g @ g)
        f0 = merit(y, r)
        t, ok = 1.0, False
        while t >= 2.0**-45:
            yt = y + t * step
            ft = merit(yt, A @ yt - x0)
            if np.isfinite(ft) and ft <= f0 + 1e-4 * t * sc * slope:
                ok = True
                break
            t *= 0.5
        if not ok:
            break
        y = yt
    budget.charge(k)
    return y, converged


def _feasibility_distance_p(A, x0, space, budget: _Budget):
    """l_p distance from x0 to range(A); 0 when A has full numerical rank."""
    U, s, _ = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > smax * 1e-13)) if smax > 0 else 0
    if rank == A.shape[0]:
        return 0.0
    if rank == 0:
        return float(lp_norm(x0, space.p))
    Ur = U[:, :rank]
    # strictly convex smooth problem: min_z ||Ur z - x0||_p by damped Newton
    p = space.p
    z = Ur.T @ x0
    nu = 1e-12
    for _ in range(80):
        r = Ur @ z - x0
        g = Ur.T @ _grad_power(r, p, nu)
        if np.linalg.norm(g) <= 1e-12 * max(1.0, lp_norm(r, p) ** (p - 1.0)):
            break
        H = (Ur.T * _hess_power(r, p, nu)) @ Ur
        try:
            step = -sla.cho_solve(sla.cho_factor(H + np.eye(rank) * 1e-15), g)
        except Exception:
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        f0 = np.sum((r * r + nu * nu) ** (p / 2.0))
        t = 1.0
        while t >= 2.0**-40:
            zt = z + t * step
            rt = Ur @ zt - x0
            if np.sum((rt * rt + nu * nu) ** (p / 2.0)) < f0:
                break
            t *= 0.5
        z = z + t * step
    budget.charge(4)
    return float(lp_norm(Ur @ z - x0, space.p))


# -- general p: safeguarded secular iteration on log-mu ----------------------------


def _residual_at(A, x0, p, nu, lmu, y, gtol, budget):
    y, ok = _inner_newton(A, x0, p, float(np.exp(lmu)), nu, y, gtol, budget)
    return float(lp_norm(A @ y - x0, p)), y, ok


def _dresid_dlogmu(A, x0, p, nu, lmu, y):
    """Implicit derivative of ||Ay(mu)-x0||_p with respect to log mu."""
    mu = float(np.exp(lmu))
    r = A @ y - x0
    Hfull = np.diag(_hess_power(y, p, nu)) + mu * (A.T * _hess_power(r, p, nu)) @ A
    rhs = -mu * (A.T @ _grad_power(r, p, nu))
    dg = np.sqrt(np.clip(np.diag(Hfull), 1e-300, None))
    E = 1.0 / dg
    try:
        cf = sla.cho_factor((Hfull * E).T * E + np.eye(len(y)) * 1e-15, lower=True)
        dy = E * sla.cho_solve(cf, E * rhs)
    except Exception:
        dy = np.linalg.lstsq(Hfull, rhs, rcond=None)[0]
    nr = lp_norm(r, p)
    u = _exact_dual(r, p) / max(nr, 1e-300) ** (p - 1.0)
    return float(u @ (A @ dy))


def _secular_solve(A, x0, p, eps, nu, lmu, y, budget, tol_feas, gtol):
    """Find log-mu with ||A y(mu) - x0||_p = eps; bracketed Newton/bisection."""
    R, y, _ = _residual_at(A, x0, p, nu, lmu, y, gtol, budget)
    lo = hi = None
    ylo = yhi = None
    step = 2.0
    l = lmu
    if R > eps:
        lo, Rlo, ylo = l, R, y.copy()
        while R > eps:
            l += step
            step = min(step * 2.0, 16.0)
            if l - lmu > 400.0 or budget.exhausted:
                return y, l, False
            R, y, _ = _residual_at(A, x0, p, nu, l, y, gtol, budget)
            if R > eps:
                lo, Rlo, ylo = l, R, y.copy()
        hi, Rhi, yhi = l, R, y.copy()
    else:
        hi, Rhi, yhi = l, R, y.copy()
        while R <= eps:
            l -= step
            step = min(step * 2.0, 16.0)
            if lmu - l > 400.0 or budget.exhausted:
                return y, l, False
            R, y, _ = _residual_at(A, x0, p, nu, l, y, gtol, budget)
            if R <= eps:
                hi, Rhi, yhi = l, R, y.copy()
        lo, Rlo, ylo = l, R, y.copy()
    # safeguarded Newton: implicit derivative, bisection fallback
    l, R, y = (lo, Rlo, ylo.copy()) if abs(Rlo - eps) < abs(Rhi - eps) else (hi, Rhi, yhi.copy())
    best = (abs(R - eps), y.copy(), l)
    for _ in range(120):
        if best[0] <= tol_feas or budget.exhausted or (hi - lo) < 4e-16:
            break
        dR = _dresid_dlogmu(A, x0, p, nu, l, y)
        budget.charge(1)
        l_new = l - (R - eps) / dR if dR < 0 else None
        margin = 1e-3 * (hi - lo)
        if l_new is None or not (lo + margin <= l_new <= hi - margin):
            l_new = 0.5 * (lo + hi)
        ystart = ylo if (l_new - lo) < (hi - l_new) else yhi
        R, y, _ = _residual_at(A, x0, p, nu, l_new, ystart.copy(), gtol, budget)
        l = l_new
        if abs(R - eps) < best[0]:
            best = (abs(R - eps), y.copy(), l)
        if R > eps:
            lo, Rlo, ylo = l, R, y.copy()
        else:
            hi, Rhi, yhi = l, R, y.copy()
    err, y, l = best
    return y, l, err <= max(tol_feas, 1e-9)


def _solve_iterative(A, x0, eps, space, config, y_init=None):
    """General-p path (also runs at p = 2 when forced)."""
    p = space.p
    budget = _Budget(config.max_iter)
    dist = _feasibility_distance_p(A, x0, space, budget)
    if dist >= eps - 1e-12:
        raise InfeasibleProblem(
            f"l_p distance from x0 to range(A) is {dist:.6g} >= eps = {eps:.6g}",
            distance=dist, eps=eps,
        )
    y2, lam2, _ = _l2_core(A, x0, eps)
    scale = float(lp_norm(y2, p))
    Ah = A * scale
    nu_final = max(float(config.regularization), 0.0)
    gtol = min(1e-11, config.tol_kkt * 1e-3)

    def solve_at(p_k, nu, y, lmu):
        return _secular_solve(Ah, x0, p_k, eps, nu, lmu, y, budget, config.tol_feas, gtol)

    converged = False
    started_warm = y_init is not None
    if started_warm:
        y = y_init / scale
        r = Ah @ y - x0
        gy_n = np.linalg.norm(_grad_power(y, p, max(nu_final, 1e-300)))
        gr_n = np.linalg.norm(Ah.T @ _grad_power(r, p, max(nu_final, 1e-300)))
        lmu = float(np.log(max(gy_n, 1e-300) / max(gr_n, 1e-300)))
        y, lmu, converged = solve_at(p, nu_final, y, lmu)
    if not converged:
        # cold start: walk p from 2 in short continuation steps
        y = y2 / scale
        lmu = float(np.log(max(lam2 / scale**2, 1e-300)))
        if p == 2.0:
            path = [2.0]
        else:
            k = max(1, int(np.ceil(abs(p - 2.0) / 0.25)))
            path = list(2.0 + (p - 2.0) * np.arange(1, k + 1) / k)
        pending = list(path)
        p_prev = 2.0
        halvings = 0
        while pending and not budget.exhausted:
            p_k = pending[0]
            nu_k = nu_final if p_k >= 2.0 else max(nu_final, 1e-12)
            y_k, lmu_k, ok = solve_at(p_k, nu_k, y.copy(), lmu)
            if ok:
                y, lmu = y_k, lmu_k
                p_prev = p_k
                pending.pop(0)
                converged = True
            else:
                converged = False
                halvings += 1
                if halvings > 14:
                    break
                pending.insert(0, 0.5 * (p_prev + p_k))
    # exact-map polish (removes the nu bias; a no-op at p >= 2 with nu ~ 0)
    if converged and nu_final > 0.0 and not budget.exhausted:
        y_pol, lmu_pol, ok = solve_at(p, 0.0, y.copy(), lmu)
        if ok and np.all(np.isfinite(y_pol)):
            y, lmu = y_pol, lmu_pol
    mu_hat = float(np.exp(lmu))
    y_full = scale * y
    mu = mu_hat * scale**p
    feas, a, kkt, ny = _certificate(A, y_full, x0, eps, space, mu)
    sol = MinimalVectorSolution(
        y=y_full, norm_y=ny, feasibility_residual=feas, multiplier=a,
        kkt_residual=kkt, iterations=budget.used,
        converged=bool(converged and abs(feas) <= max(config.tol_feas, 1e-9)
                       and kkt <= config.tol_kkt),
        path="newton",
    )
    if not sol.converged and (abs(feas) > 1e-6 or kkt > 1e-4):
        raise MaxIterationsExceeded(
            f"iterative solver did not converge (feas {feas:.3g}, kkt {kkt:.3g}, "
            f"{budget.used} Newton steps)",
            best=sol,
        )
    return sol


def solve_min_vector(problem: MinimalVectorProblem,
                     config: SolverConfig | None = None,
                     y_init: np.ndarray | None = None) -> MinimalVectorSolution:
    """Solve the norm-minimal preimage problem with the configured path."""
    config = config or SolverConfig()
    if config.path == "closed_form_l2" and problem.space.p != 2.0:
        raise ValueError("path='closed_form_l2' requires p = 2")
    use_closed_form = (
        problem.space.p == 2.0 and config.path in ("auto", "closed_form_l2")
    )
    if use_closed_form:
        return solve_min_vector_l2(problem, config)
    A = ops.power_matrix(problem.Q, problem.n)
    return _solve_iterative(A, problem.x0, problem.eps, problem.space, config, y_init)


def min_vector_sequence(Q, x0, eps, N, space: LpSpace,
                        config: SolverConfig | None = None) -> MinimalVectorSequence:
    """Solutions for n = 1..N, warm-starting each run from the previous one."""
    config = config or SolverConfig()
    Q = ops.as_operator(Q)
    if int(N) < 1:
        raise ValueError("N must be >= 1")
    N = int(N)
    profile = ops.quasinilpotency_profile(Q, space, min(N + 1, 2 * space.d))
    if N > profile.effective_horizon:
        warnings.warn(
            f"sequence depth N={N} exceeds the effective quasi-nilpotency "
            f"horizon {profile.effective_horizon}; deeper entries probe the "
            "regime where the finite surrogate stops contracting",
            stacklevel=2,
        )
    solutions = []
    y_prev = None
    for n in range(1, N + 1):
        problem = MinimalVectorProblem(Q=Q, x0=x0, eps=eps, n=n, space=space)
        try:
            sol = solve_min_vector(
                problem, config, y_init=y_prev if config.warm_start else None,
            )
        except (InfeasibleProblem, MaxIterationsExceeded) as err:
            err.n = n
            raise
        solutions.append(sol)
        y_prev = sol.y
    norms = np.array([s.norm_y for s in solutions])
    ratios = norms[:-1] / norms[1:] if N > 1 else np.zeros(0)
    return MinimalVectorSequence(
        solutions=solutions, norms=norms, ratios=ratios,
        eps=float(eps), x0=space.check_vector(x0), space=space, N=N, Q=Q,
    )
