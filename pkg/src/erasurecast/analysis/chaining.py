"""Markov reward model of the chaining algorithm.

States (1-based, as in the tables):

=====  ======================================  =========================
state  transmission                            entered when
=====  ======================================  =========================
1      fresh q_ij + q_ik                       a chain starts
2      q_ij replaced, q_ik kept                j received, chain alive
3      q_ik replaced, q_ij kept                k received, chain alive
4      new combination of the same two         only the builder received
5      none (absorbing, chain stalled)         chain cannot continue
6      none (absorbing, chain decoded)         builder received in 4
=====  ======================================  =========================

Each transient state has a table of eight rows, one per erasure pattern
Z = (z_i, z_j, z_k) with 1 meaning erased. A row names the next state and
seven impulse rewards in :data:`REWARD_NAMES` order.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from erasurecast.analysis.uncoded import ChannelLike, as_channel, others
from erasurecast.linalg import Matrix
from erasurecast.markov import (
    CanonicalMrp,
    MrpSpec,
    canonicalize,
    conditional_absorption_reward,
    expected_steps,
    transition_limit,
    unscaled_rewards,
)
from erasurecast.utils import SHARD_SIZE, shard_sizes
from erasurecast.utils.checks import (
    NumericFailureException,
    RejectedInputException,
    check_erasure,
    check_triple,
)
from erasurecast.utils.types import ChainRewardName

__all__ = [
    "REWARD_NAMES",
    "ChainRow",
    "chain_tables",
    "ChainMrp",
    "build_chain_mrp",
    "ChainRoles",
    "per_run_rewards",
    "m_lower",
    "SufficiencyReport",
    "sufficiency_check",
    "BoundaryPoint",
    "distortion_boundary",
    "absorption_split",
    "expected_run_length",
    "expected_run_reward",
    "ChainRunStats",
    "simulate_chain_runs",
]

logger = logging.getLogger(__name__)

REWARD_NAMES: Tuple[ChainRewardName, ...] = (
    "rho_j",
    "rho_k",
    "rho_E",
    "rho_Qi",
    "rho_Qj",
    "rho_Qk",
    "rho_Qstar",
)
NUM_STATES = 6
STALLED, DECODED = 5, 6


class ChainRow(NamedTuple):
    noise: Tuple[int, int, int]
    next_state: int
    rewards: Tuple[int, int, int, int, int, int, int]


def _rows(spec: Sequence[Tuple[int, str]]) -> Tuple[ChainRow, ...]:
    rows = []
    for code, (next_state, rewards) in enumerate(spec):
        noise = ((code >> 2) & 1, (code >> 1) & 1, code & 1)
        rows.append(ChainRow(noise, next_state, tuple(int(c) for c in rewards)))  # type: ignore[arg-type]
    return tuple(rows)


# Rows in Z order 000, 001, ..., 111.
_STATE1 = _rows(
    [(5, "1110001"), (2, "1010000"), (3, "0110000"), (4, "0010000"),
     (5, "1102000"), (1, "1001000"), (1, "0101000"), (1, "0000000")]
)  # fmt: skip
_STATE2 = _rows(
    [(5, "1110001"), (2, "1010000"), (3, "0110000"), (4, "0010000"),
     (5, "1101001"), (2, "1001000"), (5, "0100001"), (2, "0000000")]
)  # fmt: skip
_STATE4 = _rows(
    [(6, "1110000"), (6, "1010010"), (6, "0110100"), (6, "0010110"),
     (5, "1100001"), (2, "1000000"), (3, "0100000"), (4, "0000000")]
)  # fmt: skip


def _swap_targets(rows: Tuple[ChainRow, ...]) -> Tuple[ChainRow, ...]:
    """Exchange the roles of j and k in a table."""
    swap_state = {2: 3, 3: 2}
    by_noise = {row.noise: row for row in rows}
    swapped = []
    for row in rows:
        zi, zj, zk = row.noise
        source = by_noise[(zi, zk, zj)]
        r = source.rewards
        swapped.append(
            ChainRow(
                row.noise,
                swap_state.get(source.next_state, source.next_state),
                (r[1], r[0], r[2], r[3], r[5], r[4], r[6]),
            )
        )
    return tuple(swapped)


_TABLES: Dict[int, Tuple[ChainRow, ...]] = {
    1: _STATE1,
    2: _STATE2,
    3: _swap_targets(_STATE2),
    4: _STATE4,
}


def chain_tables() -> Dict[int, Tuple[ChainRow, ...]]:
    """Noise-indexed transition tables of transient states 1-4."""
    return dict(_TABLES)


def _noise_probability(noise: Tuple[int, int, int], eps: Tuple[float, float, float]) -> float:
    p = 1.0
    for z, e in zip(noise, eps):
        p *= e if z else 1.0 - e
    return p


###############################################################################
# Matrix model.
###############################################################################


@dataclass(frozen=True)
class ChainMrp:
    """Six-state transition matrix and the seven per-transition reward
    matrices, each reward entry averaged over the noise patterns that cause
    the transition."""

    eps: Tuple[float, float, float]
    transition: Matrix
    rewards: Dict[str, Matrix]
    _canonical: Dict[str, CanonicalMrp] = field(default_factory=dict, compare=False, repr=False)

    def spec(self, name: ChainRewardName) -> MrpSpec:
        if name not in self.rewards:
            raise KeyError(f"Unknown reward {name!r}; known: {list(REWARD_NAMES)}.")
        return MrpSpec(self.transition, self.rewards[name])

    def canonical(self, name: ChainRewardName) -> CanonicalMrp:
        if name not in self._canonical:
            self._canonical[name] = canonicalize(self.spec(name))
        return self._canonical[name]


def build_chain_mrp(eps_i: float, eps_j: float, eps_k: float) -> ChainMrp:
    """Compile the tables into matrices.

    The builder may have ε_i = 1 (it never receives); the targets need
    ε < 1 for the chain to be absorbing.
    """
    eps = (
        check_erasure(eps_i, "eps_i", allow_one=True),
        check_erasure(eps_j, "eps_j"),
        check_erasure(eps_k, "eps_k"),
    )
    p = np.zeros((NUM_STATES, NUM_STATES))
    weighted = np.zeros((len(REWARD_NAMES), NUM_STATES, NUM_STATES))
    for state, rows in _TABLES.items():
        for row in rows:
            prob = _noise_probability(row.noise, eps)
            p[state - 1, row.next_state - 1] += prob
            weighted[:, state - 1, row.next_state - 1] += prob * np.asarray(row.rewards)
    p[STALLED - 1, STALLED - 1] = 1.0
    p[DECODED - 1, DECODED - 1] = 1.0

    with np.errstate(divide="ignore", invalid="ignore"):
        conditional = np.where(p > 0, weighted / p, 0.0)
    # Absorbing rows earn nothing.
    conditional[:, STALLED - 1 :, :] = 0.0
    rewards = {name: Matrix(conditional[n]) for n, name in enumerate(REWARD_NAMES)}
    return ChainMrp(eps=eps, transition=Matrix(p), rewards=rewards)


def absorption_split(model: ChainMrp) -> Tuple[float, float]:
    """(P^∞(1,5), P^∞(1,6)): how often a run stalls or decodes."""
    c = model.canonical("rho_E")
    limit = transition_limit(c)
    start = c.canonical_index(0)
    return (
        float(limit.entries[start, c.canonical_index(STALLED - 1)]),
        float(limit.entries[start, c.canonical_index(DECODED - 1)]),
    )


def expected_run_length(model: ChainMrp) -> float:
    """Expected slots per run started in state 1."""
    c = model.canonical("rho_E")
    return float(expected_steps(c)[c.canonical_index(0)])


def expected_run_reward(
    model: ChainMrp, name: ChainRewardName, conditional_on: Optional[int] = None
) -> float:
    """Expected reward `name` accumulated over one run from state 1.

    :param conditional_on: None for the unconditional mean, or the 1-based
      absorbing state (5 or 6) to condition on.
    """
    c = model.canonical(name)
    if conditional_on is None:
        return float(unscaled_rewards(c).per_state[0])
    if conditional_on not in (STALLED, DECODED):
        raise RejectedInputException(
            f"conditional_on must be {STALLED} or {DECODED}, got {conditional_on}."
        )
    return conditional_absorption_reward(c, 0, conditional_on - 1)


###############################################################################
# Roles and the sufficiency condition.
###############################################################################


@dataclass(frozen=True)
class ChainRoles:
    """Builder i, targets (j, k) with j < k, and the non-bottleneck target u."""

    builder: int
    targets: Tuple[int, int]
    bottleneck_excluded: int

    def __post_init__(self) -> None:
        if self.builder not in (0, 1, 2):
            raise RejectedInputException(f"builder must be 0, 1 or 2, got {self.builder}.")
        if tuple(self.targets) != others(self.builder):
            raise RejectedInputException(
                f"targets must be {others(self.builder)} for builder {self.builder}."
            )
        if self.bottleneck_excluded not in self.targets:
            raise RejectedInputException("The excluded user must be a target.")

    @classmethod
    def create(cls, builder: int, u: int) -> "ChainRoles":
        return cls(builder=builder, targets=others(builder), bottleneck_excluded=u)

    @classmethod
    def from_demands(
        cls, builder: int, eps: ChannelLike, residual_demands: Sequence[float]
    ) -> "ChainRoles":
        """u is the target with the smaller point-to-point latency
        (1 - d̂_r)/(1 - ε_r); ties go to the lower index."""
        e = as_channel(eps)
        demands = check_triple(residual_demands, "residual_demands")
        j, k = others(builder)
        w = {r: demands[r] / (1.0 - e[r]) for r in (j, k)}
        u = j if w[j] <= w[k] else k
        return cls(builder=builder, targets=(j, k), bottleneck_excluded=u)

    @property
    def u_reward(self) -> ChainRewardName:
        return "rho_j" if self.bottleneck_excluded == self.targets[0] else "rho_k"

    def role_eps(self, eps: ChannelLike) -> Tuple[float, float, float]:
        e = as_channel(eps)
        j, k = self.targets
        return e[self.builder], e[j], e[k]


def per_run_rewards(
    model: ChainMrp, roles: ChainRoles, unconditional_decode: bool = False
) -> Tuple[float, float]:
    """(E[R̄_u], E[R̄_E]) per run.

    E[R̄_E] is conditioned on the run decoding (absorption in state 6)
    unless `unconditional_decode` is set.

    :raises UnreachableAbsorptionException: if state 6 cannot be reached and
      the conditional form is requested.
    """
    e_u = expected_run_reward(model, roles.u_reward)
    if unconditional_decode:
        e_e = expected_run_reward(model, "rho_E")
    else:
        e_e = expected_run_reward(model, "rho_E", conditional_on=DECODED)
    return e_u, e_e


# Slack so that exact integer quotients are not floored one short.
FLOOR_SLACK = 1e-9


def m_lower(n_symbols: int, demand_u: float, e_reward_u: float) -> int:
    """⌊N (1 - d̂_u) / E[R̄_u]⌋, a lower bound on the expected number of runs
    before user u is satisfied."""
    if e_reward_u <= 0:
        raise RejectedInputException(f"e_reward_u must be positive, got {e_reward_u}.")
    if demand_u < 0:
        raise RejectedInputException(f"demand_u must be nonnegative, got {demand_u}.")
    if n_symbols < 1:
        raise RejectedInputException(f"N must be positive, got {n_symbols}.")
    return int(math.floor(n_symbols * demand_u / e_reward_u + FLOOR_SLACK))


@dataclass(frozen=True)
class SufficiencyReport:
    e_reward_u: float
    e_reward_E_given_decode: float
    m_lower: int
    lhs: float
    rhs: float
    holds: bool
    d_i_boundary: float


def _warn_if_bottleneck(model: ChainMrp, roles: ChainRoles, demands: Sequence[float]) -> None:
    _, eps_j, eps_k = model.eps
    j, k = roles.targets
    w = {j: demands[j] / (1.0 - eps_j), k: demands[k] / (1.0 - eps_k)}
    u = roles.bottleneck_excluded
    other = k if u == j else j
    if w[u] > w[other]:
        warnings.warn(
            f"User {u + 1} is the bottleneck target but was chosen as u; the"
            " sufficiency check is then not meaningful.",
            RuntimeWarning,
        )


def sufficiency_check(
    model: ChainMrp,
    roles: ChainRoles,
    n_symbols: int,
    residual_demands: Sequence[float],
    unconditional_decode: bool = False,
) -> SufficiencyReport:
    """Whether the chaining runs finished before user u is satisfied are
    expected to carry enough equations for the builder.

    :param residual_demands: 1 - d̂_r per user, indexed by user.
    """
    demands = check_triple(residual_demands, "residual_demands")
    if min(demands) < 0:
        raise RejectedInputException("Residual demands must be nonnegative.")
    _warn_if_bottleneck(model, roles, demands)
    e_u, e_e = per_run_rewards(model, roles, unconditional_decode)
    m = m_lower(n_symbols, demands[roles.bottleneck_excluded], e_u)
    rhs = n_symbols * demands[roles.builder] / e_e if e_e > 0 else math.inf
    if demands[roles.builder] == 0:
        rhs = 0.0
    return SufficiencyReport(
        e_reward_u=e_u,
        e_reward_E_given_decode=e_e,
        m_lower=m,
        lhs=float(m),
        rhs=rhs,
        holds=m >= rhs,
        d_i_boundary=1.0 - m * e_e / n_symbols,
    )


class BoundaryPoint(NamedTuple):
    eps_u: float
    d_hat_u: float
    e_reward_u: float
    e_reward_E: float
    d_i_boundary: float


def distortion_boundary(
    eps: ChannelLike,
    roles: ChainRoles,
    sweep: Sequence[float],
    demand_u_of: Callable[[float], float] = lambda e: 1.0 - e * e,
    n_symbols: Optional[int] = None,
) -> List[BoundaryPoint]:
    """Smallest certified builder distortion along a sweep of ε_u.

    :param demand_u_of: Maps ε_u to the residual demand 1 - d̂_u; defaults
      to quadratic distortions d̂_u = ε_u².
    :param n_symbols: Finite N, or None for the floor-free asymptotic form.
    """
    if len(sweep) == 0:
        raise RejectedInputException("The sweep needs at least one point.")
    base = as_channel(eps)
    u = roles.bottleneck_excluded
    points = []
    for eps_u in sweep:
        e = base.replace(u, float(eps_u))
        model = build_chain_mrp(*roles.role_eps(e))
        e_u, e_e = per_run_rewards(model, roles)
        demand = demand_u_of(float(eps_u))
        if n_symbols is None:
            boundary = 1.0 - demand * e_e / e_u
        else:
            boundary = 1.0 - m_lower(n_symbols, demand, e_u) * e_e / n_symbols
        points.append(BoundaryPoint(float(eps_u), 1.0 - demand, e_u, e_e, boundary))
    return points


###############################################################################
# Table-driven Monte Carlo.
###############################################################################


@dataclass(frozen=True)
class ChainRunStats:
    """Sample statistics of independent runs started in state 1.

    `transition_counts[l, m]` counts l -> m transitions (0-based states).
    Reward arrays follow :data:`REWARD_NAMES`.
    """

    runs: int
    transition_counts: np.ndarray
    absorption_counts: Dict[int, int]
    reward_means: np.ndarray
    reward_stds: np.ndarray
    mean_rho_E_given_decode: float
    std_rho_E_given_decode: float


def _table_arrays() -> Tuple[np.ndarray, np.ndarray]:
    nxt = np.zeros((4, 8), dtype=np.int64)
    rew = np.zeros((4, 8, len(REWARD_NAMES)))
    for state, rows in _TABLES.items():
        for code, row in enumerate(rows):
            nxt[state - 1, code] = row.next_state - 1
            rew[state - 1, code] = row.rewards
    return nxt, rew


def _chain_shard(
    eps: np.ndarray, size: int, seed: np.random.SeedSequence, max_steps: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(seed))
    nxt_table, rew_table = _table_arrays()
    state = np.zeros(size, dtype=np.int64)
    totals = np.zeros((size, len(REWARD_NAMES)))
    counts = np.zeros((NUM_STATES, NUM_STATES), dtype=np.int64)
    alive = np.arange(size)
    steps = 0
    while alive.size > 0:
        steps += 1
        if steps > max_steps:
            raise NumericFailureException(f"{alive.size} chain runs did not absorb.")
        z = rng.random((alive.size, 3)) < eps
        code = z[:, 0] * 4 + z[:, 1] * 2 + z[:, 2]
        current = state[alive]
        nxt = nxt_table[current, code]
        totals[alive] += rew_table[current, code]
        np.add.at(counts, (current, nxt), 1)
        state[alive] = nxt
        alive = alive[nxt < STALLED - 1]
    return totals, state, counts


def simulate_chain_runs(
    eps_i: float, eps_j: float, eps_k: float, runs: int, seed: int, max_steps: int = 10**6
) -> ChainRunStats:
    """Draw Z each slot and apply the table rows directly, independently of
    the compiled matrices."""
    if runs < 1:
        raise RejectedInputException(f"runs must be >= 1, got {runs}.")
    eps = np.array(
        [
            check_erasure(eps_i, "eps_i", allow_one=True),
            check_erasure(eps_j, "eps_j"),
            check_erasure(eps_k, "eps_k"),
        ]
    )
    sizes = shard_sizes(runs, SHARD_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    shards = [_chain_shard(eps, size, child, max_steps) for size, child in zip(sizes, children)]
    totals = np.concatenate([s[0] for s in shards])
    finals = np.concatenate([s[1] for s in shards])
    counts = sum((s[2] for s in shards), np.zeros((NUM_STATES, NUM_STATES), dtype=np.int64))

    decoded = finals == DECODED - 1
    rho_e = totals[decoded, REWARD_NAMES.index("rho_E")]
    logger.debug(
        "%d chain runs: %d decoded, %d stalled.", runs, int(decoded.sum()), int((~decoded).sum())
    )
    return ChainRunStats(
        runs=runs,
        transition_counts=counts,
        absorption_counts={STALLED: int((~decoded).sum()), DECODED: int(decoded.sum())},
        reward_means=totals.mean(axis=0),
        reward_stds=totals.std(axis=0, ddof=1) if runs > 1 else np.full(len(REWARD_NAMES), math.nan),
        mean_rho_E_given_decode=float(rho_e.mean()) if rho_e.size else math.nan,
        std_rho_E_given_decode=float(rho_e.std(ddof=1)) if rho_e.size > 1 else math.nan,
    )
