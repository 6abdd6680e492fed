"""Closed-form transient and absorption rewards of an absorbing MRP.

All functions take a :class:`~erasurecast.markov.base.CanonicalMrp`. Full
matrices (P^n, R̂_n, ...) are returned in *canonical* order; use
:meth:`CanonicalMrp.to_original` to map them back. Scalar and per-state
results are indexed by original state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from erasurecast.linalg import (
    Matrix,
    add,
    block,
    geometric_tail,
    identity,
    multiply,
    power,
    row_sums,
    subtract,
)
from erasurecast.markov.base import CanonicalMrp
from erasurecast.utils.checks import (
    NumericFailureException,
    RejectedInputException,
    UnreachableAbsorptionException,
    check_prior,
)

__all__ = [
    "Horizon",
    "RewardSummary",
    "transition_power",
    "transition_limit",
    "scaled_reward_n",
    "scaled_reward_inf",
    "scaled_reward_recurrence",
    "unscaled_rewards",
    "conditional_absorption_reward",
    "absorption_probabilities",
    "expected_steps",
    "spectral_radius_estimate",
]

Horizon = Union[int, float]

# Absorption probabilities below this are treated as unreachable.
REACH_TOL = 1e-12


def _check_horizon(n: int) -> int:
    if isinstance(n, bool) or not math.isfinite(n) or int(n) != n or n < 1:
        raise RejectedInputException(f"Horizon must be a positive integer, got {n}.")
    return int(n)


def _q_power_sum(c: CanonicalMrp, n: int) -> Matrix:
    """Σ_{i=0}^{n-1} Q^i = N (I - Q^n)."""
    eye = identity(c.n_transient)
    return multiply(c.fundamental, subtract(eye, power(c.q_block, n)))


def _assemble(c: CanonicalMrp, top_left: Matrix, top_right: Matrix, bottom_right: Matrix) -> Matrix:
    nt, na = c.n_transient, c.n_absorbing
    return block(
        [
            [top_left.entries, top_right.entries],
            [np.zeros((na, nt)), bottom_right.entries],
        ]
    )


###############################################################################
# Transition matrices.
###############################################################################


def transition_power(c: CanonicalMrp, n: int) -> Matrix:
    """P^n = [[Q^n, Σ_{i<n} Q^i R], [0, I]] in canonical order."""
    n = _check_horizon(n)
    qn = power(c.q_block, n)
    return _assemble(
        c, qn, multiply(_q_power_sum(c, n), c.r_block), identity(c.n_absorbing)
    )


def transition_limit(c: CanonicalMrp) -> Matrix:
    """P^∞ = [[0, N R], [0, I]] in canonical order."""
    return _assemble(
        c,
        Matrix(np.zeros((c.n_transient, c.n_transient))),
        absorption_probabilities(c),
        identity(c.n_absorbing),
    )


def absorption_probabilities(c: CanonicalMrp) -> Matrix:
    """N R: row t, column a is the probability that transient state t is
    absorbed in absorbing state a (canonical order within each group)."""
    return multiply(c.fundamental, c.r_block)


def expected_steps(c: CanonicalMrp) -> np.ndarray:
    """Expected number of transitions before absorption, per transient state."""
    return row_sums(c.fundamental)


def spectral_radius_estimate(c: CanonicalMrp, iterations: int = 500) -> float:
    """Spectral radius of Q by power iteration from the all-ones vector.

    Q is nonnegative, so the iterate stays nonnegative and the growth factor
    of its max-norm converges to the Perron root.
    """
    q = c.q_block.entries
    v = np.ones(q.shape[0])
    estimate = 0.0
    for _ in range(iterations):
        w = q @ v
        norm = float(np.max(np.abs(w)))
        if norm == 0.0:
            return 0.0
        estimate = norm / float(np.max(np.abs(v)))
        v = w / norm
    return estimate


###############################################################################
# Scaled rewards.
###############################################################################


def scaled_reward_n(c: CanonicalMrp, n: int) -> Matrix:
    """R̂_n by its block formulas.

    Transient block: Σ_{i=0}^{n-1} Q^i H₁ Q^{n-i-1}.
    Absorbing block: N(I-Q^n)H₂ + N(I-Q^{n-1})H₁NR - Σ_{i=0}^{n-2} Q^i H₁ N Q^{n-i-1} R.
    """
    n = _check_horizon(n)
    h1, h2, q, r, fund = c.h1_block, c.h2_block, c.q_block, c.r_block, c.fundamental

    if n == 1:
        transient, absorbed = h1, h2
    else:
        # The i = n-1 summand Q^{n-1} H₁ falls outside geometric_tail's range.
        transient = add(geometric_tail(n, h1, q), multiply(power(q, n - 1), h1))
        absorbed = add(
            multiply(_q_power_sum(c, n), h2),
            multiply(multiply(_q_power_sum(c, n - 1), h1), multiply(fund, r)),
        )
        absorbed = subtract(
            absorbed, multiply(geometric_tail(n, multiply(h1, fund), q), r)
        )

    return _assemble(
        c, transient, absorbed, Matrix(np.zeros((c.n_absorbing, c.n_absorbing)))
    )


def scaled_reward_recurrence(c: CanonicalMrp, n: int) -> Matrix:
    """R̂_n via R̂_k = R̂_{k-1} P + P^{k-1} H, starting from R̂_1 = H."""
    n = _check_horizon(n)
    p = c.full_transition().entries
    h = c.full_h().entries
    current = h.copy()
    p_power = np.eye(p.shape[0])
    for _ in range(2, n + 1):
        p_power = p_power @ p
        current = current @ p + p_power @ h
    return Matrix(current)


def scaled_reward_inf(c: CanonicalMrp) -> Matrix:
    """R̂_∞ = [[0, N(H₂ + H₁ N R)], [0, 0]] in canonical order."""
    fund = c.fundamental
    absorbed = multiply(fund, add(c.h2_block, multiply(multiply(c.h1_block, fund), c.r_block)))
    return _assemble(
        c,
        Matrix(np.zeros((c.n_transient, c.n_transient))),
        absorbed,
        Matrix(np.zeros((c.n_absorbing, c.n_absorbing))),
    )


###############################################################################
# Unscaled rewards.
###############################################################################


@dataclass(frozen=True)
class RewardSummary:
    """Expected accumulated rewards at one horizon.

    :param scaled: R̂ in original state order.
    :param per_state: R̄(i) per original state, the row sums of `scaled`.
    :param with_prior: E[R] under the supplied prior, if any.
    :param conditional: R̄_∞(i, j) for transient rows and absorbing columns
      (original order within each group); NaN where j is unreachable from i.
      Only set for the infinite horizon.
    """

    horizon: Horizon
    scaled: Matrix
    per_state: np.ndarray
    with_prior: Optional[float] = None
    conditional: Optional[np.ndarray] = None


def unscaled_rewards(
    c: CanonicalMrp,
    horizon: Horizon = math.inf,
    prior: Optional[Sequence[float]] = None,
) -> RewardSummary:
    infinite = isinstance(horizon, float) and math.isinf(horizon) and horizon > 0
    if infinite:
        scaled_canonical = scaled_reward_inf(c)
    else:
        scaled_canonical = scaled_reward_n(c, _check_horizon(horizon))  # type: ignore[arg-type]

    scaled = c.to_original(scaled_canonical)
    per_state = row_sums(scaled)

    with_prior = None
    if prior is not None:
        p = check_prior(prior, c.num_states)
        with_prior = float(per_state @ p)

    conditional = None
    if infinite:
        nt = c.n_transient
        reach = absorption_probabilities(c).entries
        rewards = scaled_canonical.entries[:nt, nt:]
        with np.errstate(divide="ignore", invalid="ignore"):
            conditional = np.where(reach >= REACH_TOL, rewards / reach, np.nan)

    return RewardSummary(
        horizon=horizon,
        scaled=scaled,
        per_state=per_state,
        with_prior=with_prior,
        conditional=conditional,
    )


def conditional_absorption_reward(c: CanonicalMrp, i: int, j: int) -> float:
    """R̂_∞(i, j) / P^∞(i, j) for original states i (transient) and j
    (absorbing).

    :raises UnreachableAbsorptionException: if P^∞(i, j) < 1e-12.
    """
    ci, cj = c.canonical_index(i), c.canonical_index(j)
    nt = c.n_transient
    if ci >= nt:
        raise RejectedInputException(f"State {i + 1} is not transient.")
    if cj < nt:
        raise RejectedInputException(f"State {j + 1} is not absorbing.")

    reach = float(absorption_probabilities(c).entries[ci, cj - nt])
    if reach < REACH_TOL:
        raise UnreachableAbsorptionException(
            f"Absorbing state {j + 1} is unreachable from state {i + 1} "
            f"(probability {reach!r})."
        )
    reward = float(scaled_reward_inf(c).entries[ci, cj])
    value = reward / reach
    if not math.isfinite(value):
        raise NumericFailureException("Conditional absorption reward is not finite.")
    return value
