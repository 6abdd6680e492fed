from __future__ import annotations

from erasurecast.markov.base import (
    CanonicalMrp,
    MrpSpec,
    canonicalize,
    random_absorbing_spec,
    read_mrp,
)
from erasurecast.markov.oracles import SimulatedReward, enumerate_reward, simulate_reward
from erasurecast.markov.rewards import (
    RewardSummary,
    absorption_probabilities,
    conditional_absorption_reward,
    expected_steps,
    scaled_reward_inf,
    scaled_reward_n,
    scaled_reward_recurrence,
    spectral_radius_estimate,
    transition_limit,
    transition_power,
    unscaled_rewards,
)

# Disable pyflaks warnings:
assert CanonicalMrp
assert MrpSpec
assert canonicalize
assert random_absorbing_spec
assert read_mrp
assert SimulatedReward
assert enumerate_reward
assert simulate_reward
assert RewardSummary
assert absorption_probabilities
assert conditional_absorption_reward
assert expected_steps
assert scaled_reward_inf
assert scaled_reward_n
assert scaled_reward_recurrence
assert spectral_radius_estimate
assert transition_limit
assert transition_power
assert unscaled_rewards
