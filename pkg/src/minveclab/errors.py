"""Exception types shared across the laboratory."""

from __future__ import annotations


class DimensionMismatch(ValueError):
    """Operands live in spaces of different dimensions."""


class InfeasibleProblem(RuntimeError):
    """The ball around the target point misses the range of the operator power.

    Carries the measured distance from the target to the range, the ball
    radius, and (when raised inside a sequence run) the failing power ``n``.
    """

    def __init__(self, message, *, distance=None, eps=None, n=None):
        super().__init__(message)
        self.distance = distance
        self.eps = eps
        self.n = n


class MaxIterationsExceeded(RuntimeError):
    """The solver ran out of its iteration budget.

    ``best`` holds the best iterate found so far (a MinimalVectorSolution
    with ``converged=False``) so callers can inspect residuals.
    """

    def __init__(self, message, *, best=None, n=None):
        super().__init__(message)
        self.best = best
        self.n = n


class NotInCommutant(ValueError):
    """A matrix supplied as a commutant element fails the commutation check."""


class SubsequenceTooShort(RuntimeError):
    """Ratio-based subsequence selection produced fewer than two indices."""


class NondegeneracyViolated(RuntimeError):
    """The limit-candidate vector w fell below its guaranteed norm bound."""


class ZeroW(ValueError):
    """The candidate subspace cannot be built from a (numerically) zero w."""


class WitnessNotFound(RuntimeError):
    """The counterexample search of a two-sided property test came up empty."""


class NoWitness(RuntimeError):
    """No admissible witness operator among the supplied candidates."""


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown keys, bad values)."""
