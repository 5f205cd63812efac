"""One checker per quantitative statement the construction rests on.

Each checker samples or sweeps its inequality, collects violating witnesses,
and returns a :class:`CheckReport`.  Reports are deterministic given a seed,
and a report fails exactly when at least one witness violates the stated
inequality beyond its tolerance.  Strict-inequality thresholds carry a
boundary band (default 1e-6): samples landing inside the band are counted
and logged but excluded from the verdict.

The checkers are named after the statements they verify (the laboratory's
own numbering, also used by the CLI): sublemma_2_6, lemma_2_7 and the claim
inside its proof, lemma_2_3, lemma_2_4, remark_2_8, and the kernel-alignment
certificate of lemma_2_5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .banach import LpSpace, abs_pow, lp_norm
from .errors import WitnessNotFound
from .minvec import MinimalVectorSequence, MinimalVectorSolution
from . import operators as ops

__all__ = [
    "CheckReport",
    "check_sublemma_2_6",
    "epsilon_for_eta",
    "check_lemma_2_7_claim",
    "check_lemma_2_7",
    "check_lemma_2_3_bounds",
    "check_lemma_2_4",
    "check_remark_2_8",
    "check_kernel_alignment",
]

BOUNDARY_BAND = 1e-6
MAX_WITNESSES = 20


@dataclass
class CheckReport:
    name: str
    passed: bool
    tolerance: float
    boundary_band: float | None = None
    counts: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    notes: str = ""
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "tolerance": float(self.tolerance),
            "boundary_band": None if self.boundary_band is None else float(self.boundary_band),
            "counts": {k: int(v) for k, v in sorted(self.counts.items())},
            "witnesses": self.witnesses,
            "notes": self.notes,
            "seed": self.seed,
            "details": self.details,
        }


def _record(witnesses, **kw):
    if len(witnesses) < MAX_WITNESSES:
        witnesses.append({k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                          for k, v in kw.items()})


# -- sphere geometry helpers ------------------------------------------------------


def _sphere_samples(space, x0, eps, count, rng, concentration=None):
    """Points on S(x0, eps): x0 + eps * (unit direction).

    With ``concentration`` the directions mix a pull toward -x0 at several
    strengths, which populates the region where the cannot-shrink condition
    of sublemma_2_6 holds; plain Gaussian directions otherwise.
    """
    g = rng.standard_normal((count, space.d))
    if concentration is not None:
        zeta = rng.choice(concentration, size=count)
        g = -x0[None, :] + zeta[:, None] * g
    norms = lp_norm(g, space.p, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return x0[None, :] + eps * g / norms[:, None]


def _bval(space, x0, w):
    """(x0 - w)*(x0) / ||x0 - w||^2 for rows of w (threshold-1 test value)."""
    z = x0[None, :] - w
    nz = lp_norm(z, space.p, axis=1)
    action = (np.sign(z) * abs_pow(z, space.p - 1.0)) @ x0
    return action / nz**space.p


def _min_norm_on_segment(space, x0, w, lambda_grid):
    """min over the grid of lambda in [0,1) of ||x0 - lambda w|| (per row)."""
    lam = np.linspace(0.0, 1.0, lambda_grid, endpoint=False)
    out = np.empty(w.shape[0])
    argl = np.empty(w.shape[0])
    # chunked so the (rows, grid, d) tensor stays small
    chunk = max(1, int(2**21 / (lambda_grid * space.d)))
    for s in range(0, w.shape[0], chunk):
        block = w[s : s + chunk]
        diff = x0[None, None, :] - lam[None, :, None] * block[:, None, :]
        norms = np.sum(abs_pow(diff, space.p), axis=2) ** (1.0 / space.p)
        idx = np.argmin(norms, axis=1)
        out[s : s + chunk] = norms[np.arange(len(block)), idx]
        argl[s : s + chunk] = lam[idx]
    return out, argl


def _refine_min_on_segment(space, x0, w_row, lam0, h):
    """Golden-section polish of lambda -> ||x0 - lambda w|| near lam0."""
    from scipy.optimize import minimize_scalar

    def f(lam):
        return float(lp_norm(x0 - lam * w_row, space.p))

    lo, hi = max(0.0, lam0 - h), min(1.0 - 1e-12, lam0 + h)
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return min(float(res.fun), f(lam0))


def check_sublemma_2_6(space: LpSpace, x0, eps, samples=10_000, lambda_grid=1000,
                       seed=0, boundary_band=BOUNDARY_BAND) -> CheckReport:
    """Equivalence test on S(x0, eps): the segment condition
    min_{0<=lambda<1} ||x0 - lambda w|| > eps holds iff
    (x0 - w)*(x0) / ||x0 - w||^2 >= 1.

    Both sides are evaluated per sample; samples whose margin to either
    threshold falls inside the boundary band are logged and excluded.
    """
    x0 = space.check_vector(x0)
    rng = np.random.default_rng(seed)
    w = _sphere_samples(space, x0, eps, samples, rng,
                        concentration=(0.0, 0.01, 0.1, 0.5, 1.0, 2.0))
    bvals = _bval(space, x0, w)
    mins, arglam = _min_norm_on_segment(space, x0, w, lambda_grid)
    h = 1.0 / lambda_grid
    # polish grid minima that sit near the threshold so the band verdict is exact
    near = np.abs(mins - eps) <= 100.0 * boundary_band
    for i in np.nonzero(near)[0]:
        mins[i] = _refine_min_on_segment(space, x0, w[i], arglam[i], h)
    a_margin = mins - eps
    b_margin = bvals - 1.0
    boundary = (np.abs(a_margin) <= boundary_band) | (np.abs(b_margin) <= boundary_band)
    a_holds = a_margin > 0
    b_holds = b_margin >= 0
    judged = ~boundary
    disagreements = judged & (a_holds != b_holds)
    witnesses = []
    for i in np.nonzero(disagreements)[0]:
        _record(witnesses, sample=int(i), a_margin=a_margin[i], b_margin=b_margin[i])
    counts = {
        "samples": samples,
        "boundary": int(np.sum(boundary)),
        "judged": int(np.sum(judged)),
        "a_holds": int(np.sum(a_holds & judged)),
        "disagreements": int(np.sum(disagreements)),
    }
    return CheckReport(
        name="sublemma_2_6",
        passed=bool(np.sum(disagreements) == 0),
        tolerance=0.0,
        boundary_band=boundary_band,
        counts=counts,
        witnesses=witnesses,
        seed=seed,
        details={
            "eps": float(eps),
            "p": space.p,
            "d": space.d,
            "agreement_rate_judged": float(
                1.0 - np.sum(disagreements) / max(np.sum(judged), 1)
            ),
        },
    )


def epsilon_for_eta(space: LpSpace, eta) -> float:
    """Smallest radius satisfying the three constraints
    1/2 <= eps, 0 < 1/eps - 1 <= 2 delta(eta/2), 1 - eps <= eta/2:

        eps = max(1/2, 1 - eta/2, 1/(1 + 2 delta(eta/2))).

    Strictly below 1 because the modulus is positive.  eta is accepted in
    (0, 2]: sphere points never exceed distance 2, so larger bounds are
    vacuous.
    """
    eta = float(eta)
    if not (0.0 < eta <= 2.0):
        raise ValueError(f"eta must lie in (0, 2], got {eta}")
    delta = space.modulus_of_convexity(eta / 2.0)
    return max(0.5, 1.0 - eta / 2.0, 1.0 / (1.0 + 2.0 * delta))


def check_lemma_2_7_claim(space: LpSpace, x0, eta_prime, samples=10_000, seed=0,
                          boundary_band=BOUNDARY_BAND) -> CheckReport:
    """Claim inside the proof of lemma_2_7: on the unit sphere around x0,
    (x0 - x)*(x0) > 1 - 2 delta(eta') forces ||x|| < eta'.

    Sampling mixes uniform directions with a cap concentrated near x = 0
    (where the hypothesis actually holds) so the check is not vacuous.
    """
    x0 = space.check_vector(x0)
    eta_prime = float(eta_prime)
    if not (0.0 < eta_prime <= 1.0):
        raise ValueError(f"eta_prime must lie in (0, 1], got {eta_prime}")
    rng = np.random.default_rng(seed)
    delta = space.modulus_of_convexity(eta_prime)
    thresh = 1.0 - 2.0 * delta
    x = _sphere_samples(space, x0, 1.0, samples, rng,
                        concentration=(0.0, 0.005, 0.05, 0.2, 0.5, 1.0))
    z = x0[None, :] - x
    hyp_val = (np.sign(z) * abs_pow(z, space.p - 1.0)) @ x0  # ||z|| = 1 on S(x0,1)
    norms_x = lp_norm(x, space.p, axis=1)
    hyp_margin = hyp_val - thresh
    in_hyp = hyp_margin > boundary_band
    boundary = np.abs(hyp_margin) <= boundary_band
    conc_margin = eta_prime - norms_x
    violations = in_hyp & (conc_margin <= -boundary_band)
    near_conc = in_hyp & (np.abs(conc_margin) <= boundary_band)
    witnesses = []
    for i in np.nonzero(violations)[0]:
        _record(witnesses, sample=int(i), hyp_value=hyp_val[i], norm_x=norms_x[i])
    counts = {
        "samples": samples,
        "hypothesis_holds": int(np.sum(in_hyp)),
        "boundary": int(np.sum(boundary) + np.sum(near_conc)),
        "violations": int(np.sum(violations)),
    }
    return CheckReport(
        name="lemma_2_7_claim",
        passed=bool(np.sum(violations) == 0),
        tolerance=0.0,
        boundary_band=boundary_band,
        counts=counts,
        witnesses=witnesses,
        seed=seed,
        details={
            "eta_prime": eta_prime,
            "delta": float(delta),
            "threshold": float(thresh),
            "max_norm_under_hypothesis": float(np.max(norms_x[in_hyp])) if np.any(in_hyp) else None,
        },
    )


def check_lemma_2_7(space: LpSpace, x0, eta, samples=10_000, seed=0,
                    boundary_band=BOUNDARY_BAND, tol=1e-8,
                    max_attempts_factor=50) -> CheckReport:
    """Every w on S(x0, eps) that cannot be pulled inside the ball by
    shrinking toward the origin satisfies ||w|| <= eta, with eps chosen by
    ``epsilon_for_eta``.

    The cannot-shrink condition is filtered through its cheap equivalent
    from sublemma_2_6; rejection sampling concentrates near (1 - eps) x0
    where accepted points live.  If no sample passes the filter the report
    carries a degenerate-sampling note instead of failing.
    """
    x0 = space.check_vector(x0)
    eps = epsilon_for_eta(space, eta)
    rng = np.random.default_rng(seed)
    accepted = 0
    violations = 0
    boundary = 0
    attempts = 0
    max_norm_accepted = 0.0
    witnesses = []
    batch = 4096
    while accepted < samples and attempts < max_attempts_factor * samples:
        w = _sphere_samples(space, x0, eps, batch, rng,
                            concentration=(0.0, 0.005, 0.02, 0.1, 0.3, 1.0))
        attempts += batch
        bvals = _bval(space, x0, w)
        margin = bvals - 1.0
        take = margin > boundary_band
        boundary += int(np.sum(np.abs(margin) <= boundary_band))
        if not np.any(take):
            continue
        w = w[take]
        norms_w = lp_norm(w, space.p, axis=1)
        room = min(samples - accepted, w.shape[0])
        w, norms_w = w[:room], norms_w[:room]
        accepted += room
        max_norm_accepted = max(max_norm_accepted, float(np.max(norms_w)))
        bad = norms_w > eta + tol
        violations += int(np.sum(bad))
        for i in np.nonzero(bad)[0]:
            _record(witnesses, norm_w=norms_w[i], eta=eta)
    notes = ""
    if accepted == 0:
        notes = ("degenerate sampling: no sample passed the cannot-shrink filter; "
                 "verdict is vacuous")
    counts = {
        "accepted": accepted,
        "attempts": attempts,
        "boundary": boundary,
        "violations": violations,
    }
    return CheckReport(
        name="lemma_2_7",
        passed=bool(violations == 0),
        tolerance=tol,
        boundary_band=boundary_band,
        counts=counts,
        witnesses=witnesses,
        notes=notes,
        seed=seed,
        details={
            "eta": float(eta),
            "eps": float(eps),
            "max_norm_accepted": max_norm_accepted,
        },
    )


def check_lemma_2_3_bounds(seq: MinimalVectorSequence, x0, eps,
                           tol=1e-8) -> CheckReport:
    """Per-n bounds behind the nonzero-limit-functional argument:
    ||Q^n y_n|| <= 1/3 and (Q^n y_n - x0)*(-x0) >= 1/12.

    ``eps`` should come from epsilon_for_eta(space, 1/3); smaller radii are
    accepted for negative-control runs and flagged in the notes, since the
    bounds are then not guaranteed.
    """
    space = seq.space
    x0 = space.check_vector(x0)
    recommended = epsilon_for_eta(space, 1.0 / 3.0)
    notes = ""
    if eps < recommended - 1e-9:
        notes = (f"eps={eps:.9g} is below the eta=1/3 recipe value "
                 f"{recommended:.9g}; the bounds are not guaranteed at this radius")
    witnesses = []
    rows = []
    violations = 0
    for i, sol in enumerate(seq.solutions):
        n = i + 1
        Qny = seq.image(i)
        norm_Qny = space.norm(Qny)
        f = space.duality_map(Qny - x0)
        val = float(f @ (-x0))
        ok_norm = norm_Qny <= 1.0 / 3.0 + tol
        ok_val = val >= 1.0 / 12.0 - tol
        rows.append({"n": n, "norm_Qny": float(norm_Qny), "pairing": val})
        if not (ok_norm and ok_val):
            violations += 1
            _record(witnesses, n=n, norm_Qny=norm_Qny, pairing=val)
    return CheckReport(
        name="lemma_2_3",
        passed=violations == 0,
        tolerance=tol,
        counts={"n_checked": len(seq.solutions), "violations": violations},
        witnesses=witnesses,
        notes=notes,
        details={"eps": float(eps), "recommended_eps": float(recommended), "rows": rows},
    )


def check_lemma_2_4(seq: MinimalVectorSequence, Q, space: LpSpace,
                    tol=1e-8) -> CheckReport:
    """Finite certificate of the vanishing-ratio claim: for every n below the
    sequence depth, min_{1<=k<=n} ||y_k||/||y_{k+1}|| <= (certified bound on
    ||Q^n||_p)^{1/n} + tol.

    The product of the first n ratios telescopes to ||y_1||/||y_{n+1}||,
    which minimality pins under ||Q^n||; the min is at most the geometric
    mean.  The ratio trend table is emitted for inspection, never asserted:
    the subsequence claim itself is asymptotic.
    """
    Q = ops.as_operator(Q)
    if len(seq.solutions) < 2:
        raise ValueError("need a sequence of depth at least 2")
    ratios = seq.ratios  # ratios[k-1] = ||y_k|| / ||y_{k+1}||
    rows = []
    witnesses = []
    violations = 0
    for n in range(1, len(seq.solutions)):
        bound = ops.power_norm_upper_bound(Q, n, space) ** (1.0 / n)
        min_ratio = float(np.min(ratios[:n]))
        ok = min_ratio <= bound + tol
        rows.append({"n": n, "min_ratio": min_ratio, "root_bound": float(bound)})
        if not ok:
            violations += 1
            _record(witnesses, n=n, min_ratio=min_ratio, root_bound=bound)
    return CheckReport(
        name="lemma_2_4",
        passed=violations == 0,
        tolerance=tol,
        counts={"n_checked": len(rows), "violations": violations},
        witnesses=witnesses,
        details={
            "rows": rows,
            "ratio_table": [float(r) for r in ratios],
        },
    )


def check_remark_2_8(space: LpSpace, trials=100, samples_per_trial=1000,
                     seed=0) -> CheckReport:
    """Two-sided test of the sign dichotomy for functional pairs.

    Forward: when g = a f with a <= 0, no x has f(x) < 0 and g(x) < 0.
    Contrapositive: when g is NOT a nonpositive multiple of f, a violating x
    exists; searched randomly, then constructed explicitly by correcting a
    base point along ker(f).
    """
    rng = np.random.default_rng(seed)
    d = space.d
    forward_bad = 0
    witness_found = 0
    witnesses = []
    for t in range(trials):
        f = rng.standard_normal(d)
        while np.allclose(f, 0):
            f = rng.standard_normal(d)
        a = -abs(rng.standard_normal()) if t % 5 else 0.0
        g = a * f
        X = rng.standard_normal((samples_per_trial, d))
        fx = X @ f
        gx = X @ g
        if np.any((fx < 0) & (gx < 0)):
            forward_bad += 1
            _record(witnesses, trial=t, kind="forward")
        # contrapositive: corrupt g so it is not a nonpositive multiple
        if t % 2:
            g_bad = abs(rng.standard_normal()) * f  # positive multiple
        else:
            perp = rng.standard_normal(d)
            perp -= (perp @ f) / (f @ f) * f
            while np.linalg.norm(perp) < 1e-9:
                perp = rng.standard_normal(d)
                perp -= (perp @ f) / (f @ f) * f
            g_bad = a * f + perp
        x = _violation_witness(f, g_bad, rng, samples_per_trial)
        if x is not None and (f @ x) < 0 and (g_bad @ x) < 0:
            witness_found += 1
        else:
            _record(witnesses, trial=t, kind="contrapositive_missing")
    passed = forward_bad == 0 and witness_found == trials
    return CheckReport(
        name="remark_2_8",
        passed=passed,
        tolerance=0.0,
        counts={
            "trials": trials,
            "forward_violations": forward_bad,
            "contrapositive_witnesses": witness_found,
        },
        witnesses=witnesses,
        seed=seed,
        details={"samples_per_trial": samples_per_trial},
    )


def _violation_witness(f, g, rng, tries):
    """x with f(x) < 0 and g(x) < 0, or None.

    Random search first; then the explicit construction: start from x0 with
    f(x0) = -1 and, if needed, add a kernel direction of f on which g is
    strictly negative, scaled to overpower g(x0).
    """
    X = rng.standard_normal((tries, len(f)))
    mask = (X @ f < 0) & (X @ g < 0)
    idx = np.nonzero(mask)[0]
    if idx.size:
        return X[idx[0]]
    ff = float(f @ f)
    if ff == 0.0:
        return None
    x0 = -f / ff  # f(x0) = -1
    if g @ x0 < 0:
        return x0
    gperp = g - (float(g @ f) / ff) * f
    npg = np.linalg.norm(gperp)
    if npg < 1e-12 * max(1.0, np.linalg.norm(g)):
        raise WitnessNotFound(
            "g appears to be a nonpositive multiple of f; no violating x exists"
        )
    xk = -gperp / (npg * npg)  # f(xk) = 0 and g(xk) = -1
    scale = abs(float(g @ x0)) + 1.0
    return x0 + scale / (-float(g @ xk)) * xk


def check_kernel_alignment(sol: MinimalVectorSolution, Q, n, x0,
                           space: LpSpace, tol=1e-6) -> CheckReport:
    """Independent re-verification of the optimality certificate: with exact
    duality-map formulas, g = (Q^n)*(Q^n y - x0)* must be a nonpositive
    multiple of f = (y)*.  The multiplier is re-estimated by least squares,
    so this does not trust the solver's own bookkeeping.
    """
    Q = ops.as_operator(Q)
    x0 = space.check_vector(x0)
    y = sol.y
    f = space.duality_map(y)
    image = ops.apply_power(Q, n, y)
    g_vec = space.duality_map(image - x0)
    for _ in range(n):
        g_vec = Q.T @ g_vec
    a = float(g_vec @ f) / float(f @ f)
    resid = float(lp_norm(g_vec - a * f, space.q) / lp_norm(f, space.q))
    passed = resid <= tol and a <= tol
    witnesses = []
    if not passed:
        _record(witnesses, n=n, alignment_residual=resid, multiplier=a)
    return CheckReport(
        name="kernel_alignment",
        passed=passed,
        tolerance=tol,
        counts={"violations": 0 if passed else 1},
        witnesses=witnesses,
        details={"n": int(n), "multiplier": a, "alignment_residual": resid},
    )
