from __future__ import annotations

from erasurecast.tools.channel import BroadcastChannel, ChannelBase, ReplayChannel
from erasurecast.tools.experiment import run_experiment, run_state
from erasurecast.tools.queues import QueueSystem
from erasurecast.tools.simulator import (
    SimConfig,
    SimResult,
    SimState,
    run_network_coding,
    run_systematic,
    run_two_user_fallback,
)
from erasurecast.tools.tail import (
    Chaining,
    PreprocessCoding,
    TailSchemeBase,
    create_tail_scheme,
    run_chaining,
    run_preprocess_coding,
    tail_schemes,
)

# Disable pyflaks warnings:
assert BroadcastChannel
assert ChannelBase
assert ReplayChannel
assert run_experiment
assert run_state
assert QueueSystem
assert SimConfig
assert SimResult
assert SimState
assert run_network_coding
assert run_systematic
assert run_two_user_fallback
assert Chaining
assert PreprocessCoding
assert TailSchemeBase
assert create_tail_scheme
assert run_chaining
assert run_preprocess_coding
assert tail_schemes
