"""Independent oracles for the closed forms: exhaustive path enumeration and
seeded Monte-Carlo simulation."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from erasurecast.markov.base import MrpSpec, canonicalize
from erasurecast.utils import SHARD_SIZE, shard_sizes
from erasurecast.utils.checks import NumericFailureException, RejectedInputException

__all__ = [
    "enumerate_reward",
    "SimulatedReward",
    "simulate_reward",
]

logger = logging.getLogger(__name__)

MAX_ENUM_STEPS = 8
MAX_ENUM_STATES = 6


def enumerate_reward(spec: MrpSpec, n: int, i: int, j: int) -> Tuple[float, float]:
    """Sum reward times probability over every length-n path from i to j.

    Returns the scaled reward and Pr(S_n = j | S_0 = i). States are 0-based.
    """
    size = spec.num_states
    if not 1 <= n <= MAX_ENUM_STEPS or size > MAX_ENUM_STATES:
        raise RejectedInputException(
            f"Enumeration needs 1 <= n <= {MAX_ENUM_STEPS} and at most "
            f"{MAX_ENUM_STATES} states, got n={n}, |Ω|={size}."
        )
    if not (0 <= i < size and 0 <= j < size):
        raise RejectedInputException(f"States ({i}, {j}) out of range.")

    p = spec.transition.entries
    theta = spec.reward.entries

    middle = np.array(list(itertools.product(range(size), repeat=n - 1)), dtype=int)
    middle = middle.reshape(-1, n - 1)
    paths = np.hstack(
        [
            np.full((middle.shape[0], 1), i),
            middle,
            np.full((middle.shape[0], 1), j),
        ]
    )
    src, dst = paths[:, :-1], paths[:, 1:]
    probability = np.prod(p[src, dst], axis=1)
    reward = np.sum(theta[src, dst], axis=1)
    return float(np.sum(probability * reward)), float(np.sum(probability))


###############################################################################
# Monte Carlo.
###############################################################################


@dataclass(frozen=True)
class SimulatedReward:
    """Sample statistics of `trials` runs started in one state.

    Dict keys are original 0-based absorbing states. Conditional means are
    NaN for absorbing states no trial ended in.
    """

    trials: int
    mean_total_reward: float
    std_error: float
    absorption_histogram: Dict[int, int]
    conditional_means: Dict[int, float]
    conditional_std_errors: Dict[int, float]


def _simulate_shard(
    transition: np.ndarray,
    reward: np.ndarray,
    absorbing: np.ndarray,
    start: int,
    size: int,
    seed: np.random.SeedSequence,
    max_steps: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Run `size` independent chains; return total rewards and final states."""
    rng = np.random.Generator(np.random.PCG64(seed))
    cumulative = np.cumsum(transition, axis=1)
    cumulative[:, -1] = 1.0

    state = np.full(size, start, dtype=np.int64)
    total = np.zeros(size)
    alive = np.flatnonzero(~absorbing[state])
    steps = 0
    while alive.size > 0:
        steps += 1
        if steps > max_steps:
            raise NumericFailureException(
                f"{alive.size} trials not absorbed after {max_steps} steps."
            )
        u = rng.random(alive.size)
        current = state[alive]
        nxt = np.sum(u[:, None] >= cumulative[current], axis=1)
        total[alive] += reward[current, nxt]
        state[alive] = nxt
        alive = alive[~absorbing[nxt]]
    return total, state


def simulate_reward(
    spec: MrpSpec,
    i: int,
    trials: int,
    seed: int,
    workers: int = 1,
    max_steps: int = 10**6,
) -> SimulatedReward:
    """Monte-Carlo estimate of the accumulated reward until absorption.

    Trials are cut into shards of `SHARD_SIZE`; shard k draws from
    `SeedSequence(seed).spawn(n_shards)[k]`, so the result depends only on
    `seed` and `trials`, never on `workers`.

    :raises NotAbsorbingException: if the process is not absorbing.
    """
    if trials < 1:
        raise RejectedInputException(f"trials must be >= 1, got {trials}.")
    c = canonicalize(spec)
    if not 0 <= i < spec.num_states:
        raise RejectedInputException(f"State {i} out of range.")

    absorbing = np.zeros(spec.num_states, dtype=bool)
    absorbing[c.absorbing_states] = True
    sizes = shard_sizes(trials, SHARD_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    args = [
        (spec.transition.entries, spec.reward.entries, absorbing, i, size, child, max_steps)
        for size, child in zip(sizes, children)
    ]

    logger.info(
        "Simulating %d trials from state %d in %d shard(s) on %d worker(s).",
        trials,
        i + 1,
        len(sizes),
        workers,
    )
    results: List[Tuple[np.ndarray, np.ndarray]]
    if workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_shard, *zip(*args)))
    else:
        results = [_simulate_shard(*a) for a in args]

    totals = np.concatenate([r[0] for r in results])
    finals = np.concatenate([r[1] for r in results])

    histogram: Dict[int, int] = {}
    means: Dict[int, float] = {}
    errors: Dict[int, float] = {}
    for a in c.absorbing_states:
        sample = totals[finals == a]
        histogram[a] = int(sample.size)
        means[a] = float(sample.mean()) if sample.size else math.nan
        errors[a] = _std_error(sample)

    return SimulatedReward(
        trials=trials,
        mean_total_reward=float(totals.mean()),
        std_error=_std_error(totals),
        absorption_histogram=histogram,
        conditional_means=means,
        conditional_std_errors=errors,
    )


def _std_error(sample: np.ndarray) -> float:
    if sample.size < 2:
        return math.nan
    return float(sample.std(ddof=1) / math.sqrt(sample.size))
