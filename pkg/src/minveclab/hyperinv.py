"""Hyperinvariant-subspace construction pipeline and its diagnostics.

The pipeline realizes, at finite dimension, the mechanism that produces a
candidate hyperinvariant subspace from a minimal-vector sequence:

1. a witness (x0, K) with K in the commutant, ||K|| <= 1 and ||K x0||
   large — in finite dimensions every operator is compact, so a normalized
   commutant element together with its norming vector always works;
2. a ratio-selected subsequence (n_k) of the minimal-vector run;
3. the limit candidate w as the tail of v_k = K Q^{n_k - 1} y_{n_k - 1},
   with the Cauchy table ||v_{k+1} - v_k|| as the convergence diagnostic;
4. the decomposition T K y_{n_k-1} = a_k y_{n_k} + r_k along each commutant
   basis element, with |a_k| certified under ||T|| ||y_{n_k-1}||/||y_{n_k}||;
5. the residual table rho_{T,k} = |(Q^{n_k} y_{n_k} - x0)*(T Q K Q^{n_k-1}
   y_{n_k-1})| whose decay is the finite-scale shadow of the annihilation
   argument; and
6. Y = span{T_j (Q w)} with its dimension, the invariance residuals
   T(Y) subset Y, and the angle of each finite-stage functional to Y.

Finite-dimensional honesty: nontriviality of Y (Y != X) has no finite
counterpart, so dim(Y) is reported, never asserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .banach import LpSpace, lp_norm
from .errors import (
    NondegeneracyViolated,
    NotInCommutant,
    NoWitness,
    SubsequenceTooShort,
    ZeroW,
)
from .minvec import MinimalVectorSequence, SolverConfig, min_vector_sequence
from .lemmas import epsilon_for_eta
from . import operators as ops

__all__ = [
    "PropertyStarWitness",
    "HyperinvariantReport",
    "choose_witness",
    "select_subsequence",
    "compute_w",
    "decompose_along_minimal_vectors",
    "residual_decay_table",
    "build_candidate_subspace",
    "invariance_residuals",
    "run_pipeline",
]

COMMUTANT_MEMBERSHIP_TOL = 1e-10


def _as_K(K, k):
    """The witness operator at stage k: constant matrix or callback k -> matrix."""
    return K(k) if callable(K) else K


@dataclass
class PropertyStarWitness:
    """Witness pair (x0, K): K from the commutant with ||K|| <= 1 and
    ||K x0|| >= (1 + eps)/2.

    ``norm_K`` is exact for p = 2 (spectral); for other exponents it is the
    attained maximum of the nonlinear power iteration, by which K is
    normalized, so the recorded value is 1 by construction and the upper
    bound certificate is listed separately.
    """

    x0: np.ndarray
    K: np.ndarray
    eps: float
    norm_K: float
    norm_Kx0: float
    commutation_residual: float
    norm_upper_bound: float
    source: str = "Q"


def choose_witness(Q, eps, space: LpSpace, candidates=None,
                   seed=0) -> PropertyStarWitness:
    """Witness from the commutant: K = C/||C|| and x0 a maximizer of ||K x||.

    Defaults to C = Q.  In finite dimensions every operator is compact, so
    this always yields ||K x0|| = 1 >= (1 + eps)/2 for any eps < 1; the
    point of the machinery is the diagnostics downstream, not existence.
    Restricting ``candidates`` can fail, in which case NoWitness is raised.
    """
    Q = ops.as_operator(Q)
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    pool = [("Q", Q)] if candidates is None else [
        (f"candidate_{i}", ops.as_operator(C)) for i, C in enumerate(candidates)
    ]
    need = (1.0 + eps) / 2.0
    best = None
    for name, C in pool:
        resid = ops.commutation_residual(Q, C)
        if resid > COMMUTANT_MEMBERSHIP_TOL:
            raise NotInCommutant(
                f"witness candidate {name} has commutation residual {resid:.3g}"
            )
        est, x = ops.operator_norm_estimate(C, space, seed=seed)
        if est <= 0.0:
            continue
        K = C / est
        x0 = x / lp_norm(x, space.p)
        norm_Kx0 = float(lp_norm(K @ x0, space.p))
        ub = ops.power_norm_upper_bound(C, 1, space) / est
        cand = PropertyStarWitness(
            x0=x0, K=K, eps=float(eps), norm_K=1.0, norm_Kx0=norm_Kx0,
            commutation_residual=resid, norm_upper_bound=float(ub), source=name,
        )
        if norm_Kx0 >= need:
            return cand
        if best is None or norm_Kx0 > best.norm_Kx0:
            best = cand
    raise NoWitness(
        f"no candidate reaches ||K x0|| >= (1+eps)/2 = {need:.6g}"
        + (f"; best was {best.norm_Kx0:.6g}" if best else "")
    )


def select_subsequence(seq: MinimalVectorSequence, theta=None) -> list:
    """Indices n >= 2 whose ratio ||y_{n-1}||/||y_n|| is <= theta.

    theta defaults to the median of the observed ratios, so a selection
    always exists at desk scale.  At least two indices are required.
    """
    if len(seq.solutions) < 2:
        raise SubsequenceTooShort("sequence must contain at least two entries")
    ratios = seq.ratios
    if theta is None:
        theta = float(np.median(ratios))
    picked = [i + 2 for i, r in enumerate(ratios) if r <= theta]
    if len(picked) < 2:
        raise SubsequenceTooShort(
            f"only {len(picked)} ratio(s) fall under theta = {theta:.6g}"
        )
    return picked


def compute_w(K, seq: MinimalVectorSequence, indices, *, tol=1e-8):
    """Tail of v_k = K Q^{n_k - 1} y_{n_k - 1} plus the Cauchy table.

    Asserts the nondegeneracy bound ||w|| >= (1 - eps)/2 - tol, which holds
    whenever the witness bounds did: the witness triangle inequality gives
    ||v_k|| >= ||K x0|| - eps >= (1 - eps)/2 on the sphere.
    """
    vs = []
    for k, n in enumerate(indices):
        sol_prev = seq.solutions[n - 2]  # y_{n-1}
        z = ops.apply_power(seq.Q, n - 1, sol_prev.y)
        vs.append(_as_K(K, k) @ z)
    cauchy = [float(lp_norm(vs[i + 1] - vs[i], seq.space.p)) for i in range(len(vs) - 1)]
    w = vs[-1]
    norm_w = float(lp_norm(w, seq.space.p))
    floor = (1.0 - seq.eps) / 2.0 - tol
    if norm_w < floor:
        raise NondegeneracyViolated(
            f"||w|| = {norm_w:.6g} fell below the bound (1-eps)/2 - tol = {floor:.6g}; "
            "the witness and eps are mismatched"
        )
    return w, cauchy


def decompose_along_minimal_vectors(Q, seq: MinimalVectorSequence, indices, T, K,
                                    *, tol=1e-8) -> list:
    """Split T K y_{n_k - 1} = a_k y_{n_k} + r_k with r_k in ker((y_{n_k})*).

    a_k = (y_{n_k})*(T K y_{n_k-1}) / ||y_{n_k}||^2, which makes the kernel
    condition exact by construction; the report carries the reconstruction
    error, the functional's value on r_k, and the certified bound
    |a_k| <= ||T|| ||y_{n_k-1}|| / ||y_{n_k}||.
    """
    T = ops.as_operator(T)
    resid = ops.commutation_residual(Q, T)
    if resid > COMMUTANT_MEMBERSHIP_TOL:
        raise NotInCommutant(f"T has relative commutation residual {resid:.3g}")
    space = seq.space
    norm_T = ops.power_norm_upper_bound(T, 1, space)
    rows = []
    for k, n in enumerate(indices):
        y_prev = seq.solutions[n - 2].y
        y_cur = seq.solutions[n - 1].y
        v = T @ (_as_K(K, k) @ y_prev)
        f = space.duality_map(y_cur)
        ny2 = space.norm(y_cur) ** 2
        a_k = float(f @ v) / ny2
        r_k = v - a_k * y_cur
        bound = norm_T * seq.norms[n - 2] / seq.norms[n - 1]
        rows.append({
            "k": k,
            "n": int(n),
            "a_k": a_k,
            "norm_r": float(lp_norm(r_k, space.p)),
            "bound": float(bound),
            "bound_holds": bool(abs(a_k) <= bound + tol),
            "kernel_value": float(f @ r_k),
            "reconstruction_error": float(
                lp_norm(v - (a_k * y_cur + r_k), space.p)
            ),
        })
    return rows


def residual_decay_table(Q, seq: MinimalVectorSequence, indices, K, commutant,
                         x0, *, decay_factor=0.1, ratio_trigger=0.1):
    """rho_{T,k} = |(Q^{n_k} y_{n_k} - x0)*(T Q K Q^{n_k-1} y_{n_k-1})| for
    every commutant basis element T.

    Returns (table, asserted, holds): the full table, whether the
    conditional decay assertion was armed (the selected ratios reached
    ratio_trigger), and whether every T satisfied
    rho_{T,last} <= decay_factor * max_k rho_{T,k}.
    """
    Q = ops.as_operator(Q)
    space = seq.space
    x0 = space.check_vector(x0)
    functionals = []
    carriers = []
    for k, n in enumerate(indices):
        x_n = seq.image(n - 1)
        functionals.append(space.duality_map(x_n - x0))
        z = ops.apply_power(Q, n - 1, seq.solutions[n - 2].y)
        carriers.append(Q @ (_as_K(K, k) @ z))
    table = []
    for j, T in enumerate(commutant):
        rho = np.array([abs(float(functionals[k] @ (T @ carriers[k])))
                        for k in range(len(indices))])
        table.append({"T": j, "rho": [float(v) for v in rho]})
    selected_ratios = [float(seq.ratios[n - 2]) for n in indices]
    asserted = min(selected_ratios) <= ratio_trigger
    holds = True
    if asserted:
        for row in table:
            rho = row["rho"]
            peak = max(rho)
            if peak > 0 and rho[-1] > decay_factor * peak:
                holds = False
            row["decay_ok"] = bool(peak == 0 or rho[-1] <= decay_factor * peak)
    return table, asserted, holds


def build_candidate_subspace(Q, w, commutant, *, rank_rtol=1e-10,
                             injectivity_rtol=1e-12):
    """Orthonormal basis of Y = span{T_j (Q w)} over the commutant basis.

    Euclidean bookkeeping regardless of the ambient exponent: the basis is
    only a coordinate frame for dimension and projection diagnostics.
    Requires w != 0 and Q injective (kernel and range are the trivial ways
    for an operator to have an obvious invariant subspace).
    """
    Q = ops.as_operator(Q)
    w = np.asarray(w, dtype=float)
    if float(np.max(np.abs(w))) == 0.0:
        raise ZeroW("cannot build the candidate subspace from w = 0")
    sv = np.linalg.svd(Q, compute_uv=False)
    if sv[-1] <= injectivity_rtol * sv[0]:
        raise ValueError(
            "Q is numerically singular; its kernel is already an invariant subspace"
        )
    Qw = Q @ w
    cols = np.column_stack([T @ Qw for T in commutant])
    U, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ZeroW("span{T_j(Qw)} collapsed to zero")
    dim = int(np.sum(s > rank_rtol * s[0]))
    return U[:, :dim], dim


def invariance_residuals(Y_basis, commutant):
    """Relative projection residual of T y off Y, per commutant element.

    This is the defining property of the candidate: every commutant element
    maps Y into Y.  Residuals are relative to ||T y||; columns mapped to
    (numerical) zero count as zero residual.
    """
    out = []
    for j, T in enumerate(commutant):
        worst = 0.0
        for i in range(Y_basis.shape[1]):
            v = T @ Y_basis[:, i]
            nv = np.linalg.norm(v)
            if nv < 1e-300:
                continue
            resid = np.linalg.norm(v - Y_basis @ (Y_basis.T @ v)) / nv
            worst = max(worst, float(resid))
        out.append({"T": j, "max_relative_residual": worst})
    return out


def functional_angles_to_Y(Y_basis, seq: MinimalVectorSequence, indices, x0):
    """Angle between each selected-stage functional and the subspace Y.

    The functional (Q^{n_k} y_{n_k} - x0)* should, in the limit mechanism,
    annihilate Y; mass on Y near 0 means the angle is near 90 degrees.
    """
    space = seq.space
    rows = []
    for n in indices:
        f = space.duality_map(seq.image(n - 1) - space.check_vector(x0))
        nf = np.linalg.norm(f)
        mass = float(np.linalg.norm(Y_basis.T @ f) / nf) if nf > 0 else 0.0
        mass = min(max(mass, 0.0), 1.0)
        rows.append({
            "n": int(n),
            "mass_on_Y": mass,
            "angle_deg": float(np.degrees(np.arccos(mass))),
        })
    return rows


@dataclass
class HyperinvariantReport:
    witness: PropertyStarWitness
    indices: list
    selected_ratios: list
    w: np.ndarray
    cauchy: list
    norm_w: float
    Qw: np.ndarray
    Y_dim: int
    commutant_dim: int
    decomposition: dict          # per-T rows from decompose_along_minimal_vectors
    residual_table: list
    decay_asserted: bool
    decay_holds: bool
    invariance: list
    angles: list
    eps: float
    N: int
    notes: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self, include_vectors=True):
        out = {
            "eps": float(self.eps),
            "N": int(self.N),
            "indices": [int(i) for i in self.indices],
            "selected_ratios": [float(r) for r in self.selected_ratios],
            "norm_w": float(self.norm_w),
            "cauchy": [float(c) for c in self.cauchy],
            "Y_dim": int(self.Y_dim),
            "commutant_dim": int(self.commutant_dim),
            "witness": {
                "source": self.witness.source,
                "norm_K": float(self.witness.norm_K),
                "norm_Kx0": float(self.witness.norm_Kx0),
                "commutation_residual": float(self.witness.commutation_residual),
                "norm_upper_bound": float(self.witness.norm_upper_bound),
            },
            "decomposition": self.decomposition,
            "residual_table": self.residual_table,
            "decay_asserted": bool(self.decay_asserted),
            "decay_holds": bool(self.decay_holds),
            "invariance": self.invariance,
            "angles": self.angles,
            "notes": self.notes,
        }
        if include_vectors:
            out["x0"] = [float(v) for v in self.witness.x0]
            out["w"] = [float(v) for v in self.w]
            out["Qw"] = [float(v) for v in self.Qw]
        out.update(self.extras)
        return out


def run_pipeline(Q, space: LpSpace, *, N, eta=1.0 / 3.0, eps=None,
                 config: SolverConfig | None = None, theta=None, seed=0,
                 commutant_rtol=1e-10) -> HyperinvariantReport:
    """Full construction on one operator: witness, sequence, subsequence,
    w, decomposition and residual tables, and the candidate subspace."""
    Q = ops.as_operator(Q)
    config = config or SolverConfig()
    if eps is None:
        eps = epsilon_for_eta(space, eta)
    witness = choose_witness(Q, eps, space, seed=seed)
    seq = min_vector_sequence(Q, witness.x0, eps, N, space, config)
    indices = select_subsequence(seq, theta=theta)
    w, cauchy = compute_w(witness.K, seq, indices)
    commutant = ops.commutant_basis(Q, rtol=commutant_rtol)
    decomposition = {}
    for j, T in enumerate(commutant):
        decomposition[str(j)] = decompose_along_minimal_vectors(
            Q, seq, indices, T, witness.K
        )
    table, asserted, holds = residual_decay_table(
        Q, seq, indices, witness.K, commutant, witness.x0
    )
    Y_basis, Y_dim = build_candidate_subspace(Q, w, commutant)
    invariance = invariance_residuals(Y_basis, commutant)
    angles = functional_angles_to_Y(Y_basis, seq, indices, witness.x0)
    return HyperinvariantReport(
        witness=witness,
        indices=indices,
        selected_ratios=[float(seq.ratios[n - 2]) for n in indices],
        w=w,
        cauchy=cauchy,
        norm_w=float(lp_norm(w, space.p)),
        Qw=Q @ w,
        Y_dim=Y_dim,
        commutant_dim=commutant.dim,
        decomposition=decomposition,
        residual_table=table,
        decay_asserted=asserted,
        decay_holds=holds,
        invariance=invariance,
        angles=angles,
        eps=float(eps),
        N=int(N),
        extras={
            "norms": [float(v) for v in seq.norms],
            "ratios": [float(v) for v in seq.ratios],
        },
    )
