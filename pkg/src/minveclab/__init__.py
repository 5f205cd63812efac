"""Numerical laboratory for minimal vectors on finite-dimensional l_p spaces."""

__version__ = "0.1.0"

from .banach import LpSpace, lp_norm
from .errors import (
    ConfigError,
    DimensionMismatch,
    InfeasibleProblem,
    MaxIterationsExceeded,
    NoWitness,
    NondegeneracyViolated,
    NotInCommutant,
    SubsequenceTooShort,
    WitnessNotFound,
    ZeroW,
)
from .minvec import (
    MinimalVectorProblem,
    MinimalVectorSequence,
    MinimalVectorSolution,
    SolverConfig,
    min_vector_sequence,
    solve_min_vector,
    solve_min_vector_l2,
)
from .lemmas import (
    CheckReport,
    check_kernel_alignment,
    check_lemma_2_3_bounds,
    check_lemma_2_4,
    check_lemma_2_7,
    check_lemma_2_7_claim,
    check_remark_2_8,
    check_sublemma_2_6,
    epsilon_for_eta,
)
from .hyperinv import (
    HyperinvariantReport,
    PropertyStarWitness,
    build_candidate_subspace,
    choose_witness,
    compute_w,
    decompose_along_minimal_vectors,
    invariance_residuals,
    residual_decay_table,
    run_pipeline,
    select_subsequence,
)
from . import operators

__all__ = [
    "LpSpace",
    "lp_norm",
    "operators",
    "SolverConfig",
    "MinimalVectorProblem",
    "MinimalVectorSolution",
    "MinimalVectorSequence",
    "solve_min_vector",
    "solve_min_vector_l2",
    "min_vector_sequence",
    "CheckReport",
    "epsilon_for_eta",
    "check_sublemma_2_6",
    "check_lemma_2_7_claim",
    "check_lemma_2_7",
    "check_lemma_2_3_bounds",
    "check_lemma_2_4",
    "check_remark_2_8",
    "check_kernel_alignment",
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
    "ConfigError",
    "DimensionMismatch",
    "InfeasibleProblem",
    "MaxIterationsExceeded",
    "NotInCommutant",
    "SubsequenceTooShort",
    "NondegeneracyViolated",
    "ZeroW",
    "WitnessNotFound",
    "NoWitness",
]
