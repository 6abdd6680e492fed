"""Analysis of the systematic and instantly-decodable phases.

Users are indexed 0, 1, 2. For user i, (j, k) always denotes the other two
users in increasing order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from erasurecast.analysis.lp import solve_small_lp, warn_if_not_unique
from erasurecast.utils.checks import (
    NumericFailureException,
    RejectedInputException,
    check_distortion,
    check_erasure,
    check_triple,
)
from erasurecast.utils.types import Constraint, Triple

__all__ = [
    "ChannelTriple",
    "DistortionTriple",
    "others",
    "systematic_latency",
    "queue_bounds",
    "uncoded_lp_constraints",
    "UncodedSolution",
    "solve_uncoded_lp",
    "LatencyBounds",
    "latency_bounds",
    "optimal_distortion",
    "provisional_distortions",
    "OptimalityReport",
    "optimality_report",
]

# Residual queues at or below this are treated as empty.
EMPTY_QUEUE_TOL = 1e-12
FIXED_POINT_TOL = 1e-12
# Attempt an exact active-set solve every this many iterations.
POLISH_EVERY = 16


@dataclass(frozen=True)
class ChannelTriple:
    """Per-user erasure probabilities, each in [0, 1)."""

    eps: Triple

    def __post_init__(self) -> None:
        values = check_triple(self.eps, "eps")
        for u, e in enumerate(values):
            check_erasure(e, f"eps{u + 1}")
        object.__setattr__(self, "eps", values)

    def __getitem__(self, u: int) -> float:
        return self.eps[u]

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter(self.eps)

    def replace(self, user: int, value: float) -> "ChannelTriple":
        values = list(self.eps)
        values[user] = value
        return ChannelTriple(tuple(values))  # type: ignore[arg-type]


@dataclass(frozen=True)
class DistortionTriple:
    """Per-user distortion targets, each in [0, 1]."""

    d: Triple

    def __post_init__(self) -> None:
        values = check_triple(self.d, "d")
        for u, v in enumerate(values):
            check_distortion(v, f"d{u + 1}")
        object.__setattr__(self, "d", values)

    def __getitem__(self, u: int) -> float:
        return self.d[u]

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter(self.d)

    @classmethod
    def quadratic(cls, eps: "ChannelLike") -> "DistortionTriple":
        """d_i = ε_i², the setting used throughout the figure sweeps."""
        return cls(tuple(e * e for e in as_channel(eps)))  # type: ignore[arg-type]


ChannelLike = Union[ChannelTriple, Sequence[float]]
DistortionLike = Union[DistortionTriple, Sequence[float]]


def as_channel(eps: ChannelLike) -> ChannelTriple:
    return eps if isinstance(eps, ChannelTriple) else ChannelTriple(tuple(eps))  # type: ignore[arg-type]


def as_distortion(d: DistortionLike) -> DistortionTriple:
    return d if isinstance(d, DistortionTriple) else DistortionTriple(tuple(d))  # type: ignore[arg-type]


def others(i: int) -> Tuple[int, int]:
    j, k = (u for u in range(3) if u != i)
    return j, k


__all__ += ["as_channel", "as_distortion"]


###############################################################################
# Queue bounds.
###############################################################################


def systematic_latency(eps: ChannelLike) -> float:
    """T̄₀ = 1 / (1 - ε₁ε₂ε₃)."""
    e = as_channel(eps)
    return 1.0 / (1.0 - e[0] * e[1] * e[2])


def queue_bounds(eps: ChannelLike, t: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Expected maximum normalized sizes of Q_{j,k} and Q_i for every i.

    :returns: (q_jk_plus, q_i_plus), each indexed by i.
    """
    e = as_channel(eps)
    tv = np.asarray(t, dtype=float)
    if tv.shape != (3,) or np.any(tv < 0):
        raise RejectedInputException(f"t must be three nonnegative reals, got {t!r}.")
    t0 = systematic_latency(e)
    q_jk = np.zeros(3)
    q_i = np.zeros(3)
    for i in range(3):
        j, k = others(i)
        q_jk[i] = t0 * (1 - e[i]) * e[j] * e[k]
        q_i[i] = (
            t0 * e[i] * (1 - e[j]) * (1 - e[k])
            + tv[j] * e[i] * (1 - e[k])
            + tv[k] * e[i] * (1 - e[j])
        )
    return q_jk, q_i


def _caps(e: ChannelTriple) -> np.ndarray:
    q_jk, _ = queue_bounds(e, (0.0, 0.0, 0.0))
    caps = np.zeros(3)
    for i in range(3):
        j, k = others(i)
        caps[i] = q_jk[i] / (1 - e[j] * e[k])
    return caps


def uncoded_lp_constraints(eps: ChannelLike) -> List[Constraint]:
    """Rows of the LP whose maximizer is (T̄₁, T̄₂, T̄₃).

    For each i, in order: T_i(1-ε_i) - T_jε_i(1-ε_k) - T_kε_i(1-ε_j) <=
    T̄₀ε_i(1-ε_j)(1-ε_k), then T_i <= Q⁺_{j,k} / (1 - ε_jε_k).
    """
    e = as_channel(eps)
    t0 = systematic_latency(e)
    caps = _caps(e)
    rows: List[Constraint] = []
    for i in range(3):
        j, k = others(i)
        queue = [0.0, 0.0, 0.0]
        queue[i] = 1 - e[i]
        queue[j] = -e[i] * (1 - e[k])
        queue[k] = -e[i] * (1 - e[j])
        rows.append((queue, t0 * e[i] * (1 - e[j]) * (1 - e[k])))
        cap = [0.0, 0.0, 0.0]
        cap[i] = 1.0
        rows.append((cap, float(caps[i])))
    return rows


###############################################################################
# Fixed point.
###############################################################################


@dataclass(frozen=True)
class UncodedSolution:
    """Expected normalized slot counts of the systematic and pairing phases.

    :param active_constraints: Per user, "queue_i_bound" if Q_i ran dry
      first, "queue_jk_bound" if Q_{j,k} did.
    :param residual_queues: |Q_i(t*)| per user.
    """

    eps: ChannelTriple
    t0: float
    t: Triple
    t_star: float
    active_constraints: Tuple[str, str, str]
    residual_queues: Triple
    iterations: int


def _fixed_point_map(e: ChannelTriple, caps: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, q_i = queue_bounds(e, t)
    queue_limited = q_i / (1 - np.asarray(e.eps))
    return np.minimum(queue_limited, caps), queue_limited


def _polish(e: ChannelTriple, caps: np.ndarray, t: np.ndarray) -> Optional[np.ndarray]:
    """Solve the linear system of the active set guessed from `t` and return
    the solution if it is an exact fixed point."""
    t0 = systematic_latency(e)
    _, queue_limited = _fixed_point_map(e, caps, t)
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for i in range(3):
        j, k = others(i)
        if caps[i] <= queue_limited[i]:
            a[i, i] = 1.0
            b[i] = caps[i]
        else:
            a[i, i] = 1 - e[i]
            a[i, j] = -e[i] * (1 - e[k])
            a[i, k] = -e[i] * (1 - e[j])
            b[i] = t0 * e[i] * (1 - e[j]) * (1 - e[k])
    try:
        candidate = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    if np.any(candidate < -FIXED_POINT_TOL):
        return None
    candidate = np.maximum(candidate, 0.0)
    image, _ = _fixed_point_map(e, caps, candidate)
    if np.max(np.abs(image - candidate)) > FIXED_POINT_TOL * max(1.0, float(np.max(caps))):
        return None
    return candidate


def solve_uncoded_lp(eps: ChannelLike, max_iterations: int = 10**6) -> UncodedSolution:
    """Least fixed point of T_i <- min(Q_i⁺(T_j, T_k)/(1-ε_i), Q⁺_{j,k}/(1-ε_jε_k)).

    The map is componentwise nondecreasing and capped, so Jacobi iteration
    from zero rises monotonically to the fixed point. Every few sweeps the
    current active set is solved exactly; the first exact fixed point found
    ends the iteration.

    :raises NumericFailureException: if neither converges within
      `max_iterations` sweeps.
    """
    e = as_channel(eps)
    caps = _caps(e)
    t = np.zeros(3)
    solution: Optional[np.ndarray] = None
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        nxt, _ = _fixed_point_map(e, caps, t)
        change = float(np.max(np.abs(nxt - t)))
        t = nxt
        if change < FIXED_POINT_TOL:
            solution = t
            break
        if iterations % POLISH_EVERY == 0:
            solution = _polish(e, caps, t)
            if solution is not None:
                break
    if solution is None:
        raise NumericFailureException(
            f"Uncoded fixed point did not converge in {max_iterations} iterations."
        )

    t0 = systematic_latency(e)
    _, queue_limited = _fixed_point_map(e, caps, solution)
    active = tuple(
        "queue_jk_bound" if caps[i] <= queue_limited[i] + FIXED_POINT_TOL else "queue_i_bound"
        for i in range(3)
    )
    _, q_i = queue_bounds(e, solution)
    residual = q_i - solution * (1 - np.asarray(e.eps))
    return UncodedSolution(
        eps=e,
        t0=t0,
        t=tuple(float(v) for v in solution),  # type: ignore[arg-type]
        t_star=float(t0 + solution.sum()),
        active_constraints=active,  # type: ignore[arg-type]
        residual_queues=tuple(float(v) for v in residual),  # type: ignore[arg-type]
        iterations=iterations,
    )


def solve_uncoded_lp_by_vertices(eps: ChannelLike) -> Tuple[np.ndarray, bool]:
    """The same optimum by exact vertex enumeration; returns (T, unique).

    Warns with a RuntimeWarning if the optimum is not a unique vertex.
    """
    result = warn_if_not_unique(
        solve_small_lp([1.0, 1.0, 1.0], uncoded_lp_constraints(eps)), "The uncoded LP"
    )
    return result.x, result.unique


__all__ += ["solve_uncoded_lp_by_vertices"]


###############################################################################
# Latency bounds and achievability.
###############################################################################


class LatencyBounds(NamedTuple):
    w: Triple
    w_minus: float
    w_plus: float


def latency_bounds(eps: ChannelLike, d: DistortionLike) -> LatencyBounds:
    """Point-to-point optimal latencies w_i = (1 - d_i)/(1 - ε_i)."""
    e, dd = as_channel(eps), as_distortion(d)
    w = tuple((1 - dd[u]) / (1 - e[u]) for u in range(3))
    return LatencyBounds(w=w, w_minus=min(w), w_plus=max(w))  # type: ignore[arg-type]


def optimal_distortion(eps: float, w: float) -> float:
    """Smallest distortion a single user with erasure probability `eps`
    reaches after `w` channel uses per source symbol."""
    check_erasure(eps)
    if w < 0 or math.isnan(w):
        raise RejectedInputException(f"Latency must be nonnegative, got {w}.")
    return max(0.0, 1.0 - w * (1.0 - eps))


def provisional_distortions(eps: ChannelLike) -> Triple:
    """Distortion each user holds after the N t* instantly-decodable slots."""
    e = as_channel(eps)
    t_star = solve_uncoded_lp(e).t_star
    return tuple(optimal_distortion(e[u], t_star) for u in range(3))  # type: ignore[return-value]


@dataclass(frozen=True)
class OptimalityReport:
    """Which achievability results certify the outer bound w⁺.

    :param achievable_latency: w⁺ if either theorem applies, else None.
    :param status: "optimal (w- <= t*)", "optimal (Q- > 0)", or
      "undetermined".
    """

    solution: UncodedSolution
    w: Triple
    w_minus: float
    w_plus: float
    q_minus: float
    theorem2_holds: bool
    theorem3_holds: bool
    achievable_latency: Optional[float]
    provisional: Triple
    status: str


def optimality_report(eps: ChannelLike, d: DistortionLike) -> OptimalityReport:
    e, dd = as_channel(eps), as_distortion(d)
    solution = solve_uncoded_lp(e)
    bounds = latency_bounds(e, dd)
    q_minus = min(solution.residual_queues)
    min_latency_holds = bounds.w_minus <= solution.t_star
    residual_holds = q_minus > EMPTY_QUEUE_TOL
    if min_latency_holds:
        status = "optimal (w- <= t*)"
    elif residual_holds:
        status = "optimal (Q- > 0)"
    else:
        status = "undetermined"
    return OptimalityReport(
        solution=solution,
        w=bounds.w,
        w_minus=bounds.w_minus,
        w_plus=bounds.w_plus,
        q_minus=q_minus,
        theorem2_holds=min_latency_holds,
        theorem3_holds=residual_holds,
        achievable_latency=bounds.w_plus if (min_latency_holds or residual_holds) else None,
        provisional=provisional_distortions(e),
        status=status,
    )
