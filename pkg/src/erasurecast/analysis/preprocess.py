"""Queue preprocessing LPs for the channel-coding tail.

δ_R^T is the amount (normalized by N) taken from queue Q_R and handed to the
channel coder as a queue every user in T must reconstruct. Handling a coded
queue for T costs 1/(1 - max_{u in T} ε_u) slots per symbol.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from erasurecast.analysis.lp import MAX_VARIABLES, solve_small_lp
from erasurecast.analysis.uncoded import (
    ChannelLike,
    ChannelTriple,
    DistortionLike,
    DistortionTriple,
    as_channel,
    as_distortion,
    others,
)
from erasurecast.utils import mask_label, mask_of, users_of
from erasurecast.utils.checks import (
    InfeasibleException,
    NumericFailureException,
    RejectedInputException,
    UnboundedException,
    check_triple,
)
from erasurecast.utils.types import Constraint, Triple, UserMask

__all__ = [
    "QueueLpSolution",
    "solve_queue_lp",
    "PreprocessInstance",
    "PreprocessSolution",
    "DELTA_NAMES",
    "solve_preprocess_lp",
    "PairQueuesInstance",
    "solve_pair_queues_lp",
    "residual_demands",
]

logger = logging.getLogger(__name__)

# Demands at or below this are already met.
DEMAND_TOL = 1e-12


def _subsets(mask: UserMask) -> List[UserMask]:
    users = list(users_of(mask))
    found = []
    for size in range(1, len(users) + 1):
        for chosen in combinations(users, size):
            found.append(mask_of(chosen))
    return found


@dataclass(frozen=True)
class QueueLpSolution:
    """Optimal δ allocation; keys of `deltas` are (R mask, T mask)."""

    deltas: Dict[Tuple[UserMask, UserMask], float]
    latency: float
    unique: bool

    def delta(self, source: UserMask, target: UserMask) -> float:
        return self.deltas.get((source, target), 0.0)

    def received(self, user: int) -> float:
        """Normalized amount user `user` reconstructs from the coded queues."""
        return sum(v for (_, t), v in self.deltas.items() if t >> user & 1)

    def labels(self) -> Dict[str, float]:
        return {
            f"delta_{mask_label(r)}^{mask_label(t)}": v for (r, t), v in self.deltas.items()
        }


def solve_queue_lp(
    queue_sizes: Mapping[UserMask, float],
    demands: Sequence[float],
    eps: ChannelLike,
) -> QueueLpSolution:
    """Cheapest split of the remaining queues into coded queues that meets
    every positive demand.

    Up to ten variables are solved by vertex enumeration, larger instances
    by ``scipy.optimize.linprog`` (HiGHS).

    :raises InfeasibleException: if some demand exceeds what the queues
      containing that user can provide.
    """
    e = as_channel(eps)
    demand = check_triple(demands, "demands")
    for mask, size in queue_sizes.items():
        if not 0 < mask < 8:
            raise RejectedInputException(f"Queue mask {mask} is not a user set.")
        if size < 0:
            raise RejectedInputException(f"Queue Q_{mask_label(mask)} has negative size.")

    variables: List[Tuple[UserMask, UserMask]] = [
        (r, t)
        for r in sorted(queue_sizes)
        if queue_sizes[r] > 0
        for t in _subsets(r)
    ]
    needy = [u for u in range(3) if demand[u] > DEMAND_TOL]
    if not variables:
        if needy:
            raise InfeasibleException("Positive demands but every queue is empty.")
        return QueueLpSolution(deltas={}, latency=0.0, unique=True)

    cost = [1.0 / (1.0 - max(e[u] for u in users_of(t))) for _, t in variables]
    constraints: List[Constraint] = []
    for r in sorted(queue_sizes):
        if queue_sizes[r] > 0:
            row = [1.0 if src == r else 0.0 for src, _ in variables]
            constraints.append((row, float(queue_sizes[r])))
    for u in needy:
        row = [-1.0 if t >> u & 1 else 0.0 for _, t in variables]
        constraints.append((row, -float(demand[u])))

    if len(variables) <= MAX_VARIABLES:
        result = solve_small_lp(cost, constraints, sense="min")
        x, value, unique = result.x, result.value, result.unique
    else:
        logger.debug("Queue LP has %d variables, using linprog.", len(variables))
        x, value = _linprog(cost, constraints)
        unique = True

    deltas = {var: float(max(v, 0.0)) for var, v in zip(variables, x)}
    return QueueLpSolution(deltas=deltas, latency=float(value), unique=unique)


def _linprog(cost: Sequence[float], constraints: Sequence[Constraint]) -> Tuple[np.ndarray, float]:
    a_ub = np.array([row for row, _ in constraints])
    b_ub = np.array([bound for _, bound in constraints])
    res = linprog(np.asarray(cost), A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if res.status == 2:
        raise InfeasibleException(f"Queue LP is infeasible: {res.message}")
    if res.status == 3:
        raise UnboundedException(f"Queue LP is unbounded: {res.message}")
    if res.status != 0:
        raise NumericFailureException(f"linprog failed: {res.message}")
    return np.asarray(res.x), float(res.fun)


def residual_demands(d: DistortionLike, received: Sequence[float]) -> Triple:
    """1 - d_u - r_u per user."""
    dd = as_distortion(d)
    r = check_triple(received, "received")
    return tuple(1.0 - dd[u] - r[u] for u in range(3))  # type: ignore[return-value]


###############################################################################
# Q_i, Q_{i,j}, Q_{i,k} remaining.
###############################################################################

DELTA_NAMES = (
    "delta_i^i",
    "delta_ij^i",
    "delta_ik^i",
    "delta_ij^j",
    "delta_ik^k",
    "delta_ij^ij",
    "delta_ik^ik",
)


@dataclass(frozen=True)
class PreprocessInstance:
    """Remaining queues Q_i, Q_{i,j}, Q_{i,k} for builder role `role_i`.

    :param queue_sizes: (|Q_i|, |Q_{i,j}|, |Q_{i,k}|), normalized by N, with
      j < k the two other users.
    :param received: Fraction r_u already reconstructed, indexed by user.
    """

    queue_sizes: Triple
    received: Triple
    eps: ChannelTriple
    d: DistortionTriple
    role_i: int

    def __post_init__(self) -> None:
        sizes = check_triple(self.queue_sizes, "queue_sizes")
        received = check_triple(self.received, "received")
        if min(sizes) < 0:
            raise RejectedInputException("Queue sizes must be nonnegative.")
        if min(received) < 0 or max(received) > 1:
            raise RejectedInputException("Received fractions must lie in [0, 1].")
        if self.role_i not in (0, 1, 2):
            raise RejectedInputException(f"role_i must be 0, 1 or 2, got {self.role_i}.")
        object.__setattr__(self, "queue_sizes", sizes)
        object.__setattr__(self, "received", received)
        object.__setattr__(self, "eps", as_channel(self.eps))
        object.__setattr__(self, "d", as_distortion(self.d))


@dataclass(frozen=True)
class PreprocessSolution:
    """The seven δ values in :data:`DELTA_NAMES` order and the latency."""

    deltas: Tuple[float, float, float, float, float, float, float]
    latency: float
    role_i: int


def solve_preprocess_lp(instance: PreprocessInstance) -> PreprocessSolution:
    i = instance.role_i
    j, k = others(i)
    qi, qij, qik = mask_of([i]), mask_of([i, j]), mask_of([i, k])
    qj, qk = mask_of([j]), mask_of([k])
    sizes = dict(zip((qi, qij, qik), instance.queue_sizes))
    solution = solve_queue_lp(
        sizes, residual_demands(instance.d, instance.received), instance.eps
    )
    order = [(qi, qi), (qij, qi), (qik, qi), (qij, qj), (qik, qk), (qij, qij), (qik, qik)]
    return PreprocessSolution(
        deltas=tuple(solution.delta(r, t) for r, t in order),  # type: ignore[arg-type]
        latency=solution.latency,
        role_i=i,
    )


###############################################################################
# Q_{1,2}, Q_{1,3}, Q_{2,3} remaining.
###############################################################################


@dataclass(frozen=True)
class PairQueuesInstance:
    """Remaining pair queues; `queue_sizes` is (|Q_12|, |Q_13|, |Q_23|)."""

    queue_sizes: Triple
    received: Triple
    eps: ChannelTriple
    d: DistortionTriple

    def __post_init__(self) -> None:
        sizes = check_triple(self.queue_sizes, "queue_sizes")
        received = check_triple(self.received, "received")
        if min(sizes) < 0:
            raise RejectedInputException("Queue sizes must be nonnegative.")
        if min(received) < 0 or max(received) > 1:
            raise RejectedInputException("Received fractions must lie in [0, 1].")
        object.__setattr__(self, "queue_sizes", sizes)
        object.__setattr__(self, "received", received)
        object.__setattr__(self, "eps", as_channel(self.eps))
        object.__setattr__(self, "d", as_distortion(self.d))


PAIR_MASKS = (mask_of([0, 1]), mask_of([0, 2]), mask_of([1, 2]))


def solve_pair_queues_lp(instance: PairQueuesInstance) -> QueueLpSolution:
    """Mirrored preprocessing LP: nine δ values, three per pair queue."""
    sizes = dict(zip(PAIR_MASKS, instance.queue_sizes))
    return solve_queue_lp(
        sizes, residual_demands(instance.d, instance.received), instance.eps
    )
