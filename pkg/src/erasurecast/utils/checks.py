"""Exceptions and input validation shared by all erasurecast modules."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from erasurecast.utils.types import Triple

__all__ = [
    "RejectedInputException",
    "SingularMatrixException",
    "NotAbsorbingException",
    "UnreachableAbsorptionException",
    "InfeasibleException",
    "UnboundedException",
    "NumericFailureException",
    "PhaseExhaustedException",
    "InvariantViolationException",
    "check_finite",
    "check_probability",
    "check_erasure",
    "check_distortion",
    "check_triple",
    "check_stochastic_rows",
    "check_prior",
]


class RejectedInputException(ValueError):
    """Indicates that an argument violates an operation's precondition."""


class SingularMatrixException(ArithmeticError):
    """Indicates that a pivot fell below the singularity threshold."""


class NotAbsorbingException(ValueError):
    """Indicates that a Markov chain has no absorbing state, or that some
    transient state cannot reach one."""


class UnreachableAbsorptionException(ValueError):
    """Indicates conditioning on an absorbing state the chain cannot reach."""


class InfeasibleException(ArithmeticError):
    """Indicates that a linear program has an empty feasible set."""


class UnboundedException(ArithmeticError):
    """Indicates that a linear program's objective is unbounded."""


class NumericFailureException(ArithmeticError):
    """Indicates that an iterative solver did not converge."""


class PhaseExhaustedException(RuntimeError):
    """Raised by a coding phase whose feed queues ran dry while users still
    had unmet demands. The orchestrator hands over to another phase."""


class InvariantViolationException(AssertionError):
    """Raised by the simulator's optional per-slot invariant checks."""


###############################################################################


def check_finite(values: Iterable[float], name: str) -> None:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
    if not np.all(np.isfinite(arr)):
        raise RejectedInputException(f"{name} must be finite, got {arr!r}.")


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise RejectedInputException(f"{name} must lie in [0, 1], got {value}.")
    return value


def check_erasure(value: float, name: str = "eps", allow_one: bool = False) -> float:
    """Validate an erasure probability.

    :param allow_one: Accept the degenerate value 1 (a user that never
      receives). Only the chaining model admits it.
    """
    value = check_probability(value, name)
    if value == 1.0 and not allow_one:
        raise RejectedInputException(f"{name} must lie in [0, 1), got 1.")
    return value


def check_distortion(value: float, name: str = "d") -> float:
    return check_probability(value, name)


def check_triple(values: Sequence[float], name: str) -> Triple:
    if len(values) != 3:
        raise RejectedInputException(
            f"{name} needs exactly three entries, got {len(values)}."
        )
    a, b, c = (float(v) for v in values)
    return (a, b, c)


def check_stochastic_rows(matrix: np.ndarray, tol: float = 1e-9) -> None:
    """Every entry in [0, 1] and every row summing to one within `tol`."""
    if np.any(matrix < -tol) or np.any(matrix > 1.0 + tol):
        raise RejectedInputException("Transition entries must lie in [0, 1].")
    sums = matrix.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size > 0:
        raise RejectedInputException(
            "Transition rows must sum to 1; row(s) {} sum to {}.".format(
                (bad + 1).tolist(), sums[bad].tolist()
            )
        )


def check_prior(prior: Sequence[float], size: int, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(prior, dtype=float)
    if p.shape != (size,):
        raise RejectedInputException(
            f"Prior needs {size} entries, got shape {p.shape}."
        )
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise RejectedInputException(
            "Prior must be nonnegative and sum to 1, got sum {}.".format(p.sum())
        )
    return p
