from __future__ import annotations

import logging
from typing import Optional

from erasurecast.tools.channel import BroadcastChannel, ChannelBase
from erasurecast.tools.simulator import (
    SimConfig,
    SimResult,
    SimState,
    run_network_coding,
    run_systematic,
    run_two_user_fallback,
)
from erasurecast.tools.tail import PreprocessCoding, create_tail_scheme
from erasurecast.utils.checks import InvariantViolationException, PhaseExhaustedException

__all__ = ["run_experiment", "run_state"]

logger = logging.getLogger(__name__)


def _fallback(cfg: SimConfig, state: SimState) -> None:
    events = state.queues.pending_events()
    run_two_user_fallback(cfg, state, events[0] if events else None)
    state.snapshot("fallback")


def _tail(cfg: SimConfig, state: SimState) -> None:
    scheme = create_tail_scheme(cfg.tail_scheme)
    try:
        scheme.run(cfg, state)
        state.tail_scheme_used = cfg.tail_scheme
    except PhaseExhaustedException as e:
        if isinstance(scheme, PreprocessCoding):
            raise
        logger.info("%s Switching to preprocess coding at slot %d.", e, state.slot)
        state.snapshot("tail")
        PreprocessCoding().run(cfg, state)
        state.tail_scheme_used = f"{cfg.tail_scheme}+preprocess_coding"
    state.snapshot("done")


def run_state(cfg: SimConfig, channel: Optional[ChannelBase] = None) -> SimState:
    """Run the whole pipeline and return the final state."""
    if channel is None:
        channel = BroadcastChannel(cfg.eps, cfg.seed)
    state = SimState(cfg, channel)
    q = state.queues

    for u in range(3):
        if q.thresholds[u] == 0:
            q.satisfied_slot[u] = 0
            q.retire(u)
    if len(q.active_users) < 3:
        # A user without demand: the rest is a two-user problem from the start.
        q.push_many(range(cfg.n_symbols))
        state.snapshot("start")
        _fallback(cfg, state)
    else:
        run_systematic(cfg, state)
        state.snapshot("systematic")
        if cfg.event_handler and q.pending_events():
            _fallback(cfg, state)
        else:
            run_network_coding(cfg, state)
            state.snapshot("network_coding")
            if q.pending_events():
                _fallback(cfg, state)
            else:
                _tail(cfg, state)

    if not q.all_satisfied():
        raise InvariantViolationException("Run ended with unsatisfied users.")
    logger.info(
        "Run with seed %d finished after %d slots (latency %.6f).",
        cfg.seed,
        state.slot,
        state.slot / cfg.n_symbols,
    )
    return state


def run_experiment(cfg: SimConfig, channel: Optional[ChannelBase] = None) -> SimResult:
    """Systematic phase, network coding, then the configured tail scheme.

    Any user satisfied during the instantly decodable phases hands the run
    over to the two-user fallback. If the chaining feeds run dry the run
    finishes with preprocess coding.

    :param channel: Erasure source; a seeded :class:`BroadcastChannel` by
      default. Pass a :class:`ReplayChannel` to replay a recorded run.
    """
    return run_state(cfg, channel).result()
