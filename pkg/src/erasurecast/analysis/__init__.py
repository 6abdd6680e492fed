from __future__ import annotations

from erasurecast.analysis.chaining import (
    ChainMrp,
    ChainRoles,
    SufficiencyReport,
    build_chain_mrp,
    chain_tables,
    distortion_boundary,
    per_run_rewards,
    simulate_chain_runs,
    sufficiency_check,
)
from erasurecast.analysis.lp import LpResult, solve_small_lp
from erasurecast.analysis.preprocess import (
    PairQueuesInstance,
    PreprocessInstance,
    PreprocessSolution,
    solve_pair_queues_lp,
    solve_preprocess_lp,
    solve_queue_lp,
)
from erasurecast.analysis.uncoded import (
    ChannelTriple,
    DistortionTriple,
    OptimalityReport,
    UncodedSolution,
    latency_bounds,
    optimality_report,
    queue_bounds,
    solve_uncoded_lp,
    systematic_latency,
)

# Disable pyflaks warnings:
assert ChainMrp
assert ChainRoles
assert SufficiencyReport
assert build_chain_mrp
assert chain_tables
assert distortion_boundary
assert per_run_rewards
assert simulate_chain_runs
assert sufficiency_check
assert LpResult
assert solve_small_lp
assert PairQueuesInstance
assert PreprocessInstance
assert PreprocessSolution
assert solve_pair_queues_lp
assert solve_preprocess_lp
assert solve_queue_lp
assert ChannelTriple
assert DistortionTriple
assert OptimalityReport
assert UncodedSolution
assert latency_bounds
assert optimality_report
assert queue_bounds
assert solve_uncoded_lp
assert systematic_latency
