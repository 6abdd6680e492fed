"""Tail schemes run once the instantly decodable phases have stopped.

Two schemes are available through :data:`tail_schemes`:

* ``chaining``: serve the two targets point-to-point optimally with
  q_{i,j} ⊕ q_{i,k} while the builder i collects chained equations.
* ``preprocess_coding``: split the remaining queues with the preprocessing
  LP and charge an idealized capacity-achieving erasure code for them.
"""

from __future__ import annotations

import logging
import math
from abc import ABCMeta, abstractmethod
from typing import Dict, List, Optional, Sequence, Set, Tuple, Type

from erasurecast.analysis.chaining import DECODED, STALLED, ChainRoles
from erasurecast.analysis.preprocess import solve_queue_lp
from erasurecast.tools.queues import QueueSystem
from erasurecast.tools.simulator import (
    SimConfig,
    SimState,
    describe_plan,
    run_two_user_fallback,
)
from erasurecast.utils import mask_label, mask_of, users_of
from erasurecast.utils.checks import (
    InfeasibleException,
    InvariantViolationException,
    PhaseExhaustedException,
)
from erasurecast.utils.types import UserMask

__all__ = [
    "TailSchemeBase",
    "Chaining",
    "PreprocessCoding",
    "tail_schemes",
    "create_tail_scheme",
    "select_roles",
    "run_chaining",
    "run_preprocess_coding",
]

logger = logging.getLogger(__name__)

COST_SLACK = 1e-9


class TailSchemeBase(metaclass=ABCMeta):
    """Finishes a run: on return every user is satisfied.

    :raises PhaseExhaustedException: if the scheme cannot continue with the
      queues it was given.
    """

    name = "base"

    @abstractmethod
    def run(self, cfg: SimConfig, state: SimState) -> SimState:
        """Run the scheme on the queues left in `state`."""


###############################################################################
# Chaining.
###############################################################################


def select_roles(cfg: SimConfig, state: SimState) -> ChainRoles:
    """Builder and non-bottleneck target for the remaining queues.

    With Q_i, Q_{i,j}, Q_{i,k} left the builder is i. With only pair queues
    left it is `cfg.builder`, or else the user with the smallest erasure
    probability (lowest index on ties).
    """
    q = state.queues
    singles = [u for u in range(3) if q.singles_for(u) > 0]
    if cfg.builder is not None:
        builder = cfg.builder
    elif len(singles) == 1:
        builder = singles[0]
    else:
        builder = min(range(3), key=lambda u: (cfg.eps[u], u))
    n = cfg.n_symbols
    residual = [max(0, q.thresholds[u] - q.received[u]) / n for u in range(3)]
    return ChainRoles.from_demands(builder, cfg.eps, residual)


class _Chain:
    """The builder's chain: the two symbols on air, the chain set χ and the
    number of equations the builder holds about χ."""

    def __init__(self, x_j: int, x_k: int) -> None:
        self.x = [x_j, x_k]
        self.chi: List[int] = []
        self._chi_set: Set[int] = set()
        self.equations = 0
        self.state = 1

    def __contains__(self, symbol: int) -> bool:
        return symbol in self._chi_set

    def absorb(self) -> None:
        for s in self.x:
            if s not in self._chi_set:
                self._chi_set.add(s)
                self.chi.append(s)
        self.equations += 1

    @property
    def decodable(self) -> bool:
        return self.equations > 0 and self.equations == len(self.chi)


def _pick_key(q: QueueSystem, builder: int, chain: _Chain) -> Optional[int]:
    only_builder = 1 << builder
    candidates = [s for s in chain.chi if int(q.need[s]) == only_builder]
    if not candidates:
        return None
    for s in (chain.x[1], chain.x[0]):
        if s in candidates:
            return s
    return min(candidates)


def _release(q: QueueSystem, builder: int, chain: _Chain, on_air: Sequence[int]) -> bool:
    """Stall or dissolve the chain; `on_air` are the symbols still out of
    any queue.

    A stalled chain leaves one builder-only symbol in Q* and parks the rest
    of χ behind it. Without such a symbol the chain is dissolved and every
    symbol goes back to its queue.

    :returns: True if the chain was stalled.
    """
    key = _pick_key(q, builder, chain) if chain.equations > 0 else None
    members = list(dict.fromkeys(list(on_air) + chain.chi))
    if key is not None:
        q.park(builder, key, chain.chi)
        only_builder = 1 << builder
        members = [
            s for s in members if s != key and (s not in chain or int(q.need[s]) != only_builder)
        ]
    for s in members:
        if q.need[s] and not q.is_queued(s):
            q.push(s)
    return key is not None


def _opportunistic_plan(
    q: QueueSystem, i: int, j: int, k: int
) -> Optional[Dict[int, int]]:
    si, sj, sk = q.single(i), q.head(1 << j), q.head(1 << k)
    if si is not None and sj is not None and sk is not None:
        return {i: si, j: sj, k: sk}
    q_ik = q.head(mask_of([i, k]))
    if sj is not None and q_ik is not None:
        return {j: sj, i: q_ik, k: q_ik}
    q_ij = q.head(mask_of([i, j]))
    if sk is not None and q_ij is not None:
        return {k: sk, i: q_ij, j: q_ij}
    return None


def _next_state(chain: _Chain, builder_received: bool, replaced: Tuple[bool, bool]) -> int:
    rep_j, rep_k = replaced
    if builder_received and chain.decodable:
        return DECODED
    if chain.equations == 0:
        return STALLED if rep_j and rep_k else 1
    if not rep_j and not rep_k:
        return 4 if builder_received else chain.state
    if rep_j and not rep_k:
        return 2 if chain.x[1] in chain else STALLED
    if rep_k and not rep_j:
        return 3 if chain.x[0] in chain else STALLED
    return STALLED


def run_chaining(cfg: SimConfig, state: SimState, roles: ChainRoles) -> SimState:
    """Run chains until some user is satisfied.

    Every slot sends the current pair (a new combination of the same two
    symbols in state 4). The builder's equations about χ are counted; once
    they match |χ| the builder decodes all of χ. A chain that cannot go on
    leaves a key symbol in Q*.

    Returns with the satisfied users still active, ready for the two-user
    fallback.

    :raises PhaseExhaustedException: if Q_{i,j} or Q_{i,k} runs dry while
      every user still has unmet demands.
    """
    q = state.queues
    i = roles.builder
    j, k = roles.targets
    feeds = (mask_of([i, j]), mask_of([i, k]))
    q.builder = i
    start = state.channel.slot
    logger.info(
        "Chaining with builder %d, targets %d and %d (non-bottleneck %d).",
        i + 1,
        j + 1,
        k + 1,
        roles.bottleneck_excluded + 1,
    )

    def finish() -> SimState:
        state.phase_slots["tail"] += state.channel.slot - start
        return state

    while True:
        if q.pending_events():
            return finish()
        x_j, x_k = q.pop(feeds[0]), q.pop(feeds[1])
        if x_j is None or x_k is None:
            q.push_many([s for s in (x_j, x_k) if s is not None])
            finish()
            raise PhaseExhaustedException(
                f"Chain feeds Q_{mask_label(feeds[0])}/Q_{mask_label(feeds[1])} are empty."
            )
        chain = _Chain(x_j, x_k)

        while chain.state not in (STALLED, DECODED):
            if not cfg.chaining_restricted:
                plan = _opportunistic_plan(q, i, j, k)
                while plan is not None:
                    z = state.channel.draw()
                    for u, s in plan.items():
                        if not z[u]:
                            q.deliver(u, s, state.slot)
                    state.log_slot("opportunistic", z, describe_plan(plan))
                    state.verify()
                    if q.pending_events():
                        _release(q, i, chain, chain.x)
                        return finish()
                    plan = _opportunistic_plan(q, i, j, k)

            z = state.channel.draw()
            got_i, got_j, got_k = (not z[i]), (not z[j]), (not z[k])
            if got_i:
                if cfg.check_invariants and chain.equations > 0 and not (
                    chain.x[0] in chain or chain.x[1] in chain
                ):
                    raise InvariantViolationException("Chain link shares no symbol with χ.")
                chain.absorb()
            if got_j:
                q.deliver(j, chain.x[0], state.slot)
            if got_k:
                q.deliver(k, chain.x[1], state.slot)
            nxt = _next_state(chain, got_i, (got_j, got_k))
            action = f"x{chain.x[0]}+{'2' if chain.state == 4 else ''}x{chain.x[1]}"
            state.log_slot(f"chain{chain.state}", z, action)
            state.transition_counts[chain.state - 1, nxt - 1] += 1

            if nxt == DECODED:
                decoded = sum(q.deliver(i, s, state.slot) for s in chain.chi)
                if cfg.check_invariants and decoded != chain.equations:
                    raise InvariantViolationException(
                        f"Builder decoded {decoded} symbols from {chain.equations} equations."
                    )
                q.push_many([s for s in chain.x if q.need[s]])
                state.absorptions[DECODED] += 1
                state.builder_decodes.append(chain.equations)
                logger.debug("Chain decoded %d symbols at slot %d.", chain.equations, state.slot)
            elif nxt == STALLED:
                stalled = _release(q, i, chain, chain.x)
                state.absorptions[STALLED] += 1
                logger.debug(
                    "Chain stalled at slot %d with %d equations%s.",
                    state.slot,
                    chain.equations,
                    ", key in Q*" if stalled else "",
                )
            else:
                on_air = list(chain.x)
                for idx, replaced in enumerate((got_j, got_k)):
                    if not replaced:
                        continue
                    old = chain.x[idx]
                    on_air.remove(old)
                    if old not in chain:
                        q.push(old)
                    new = q.pop(feeds[idx])
                    if new is None:
                        _release(q, i, chain, on_air)
                        finish()
                        raise PhaseExhaustedException(
                            f"Chain feed Q_{mask_label(feeds[idx])} ran dry mid-chain."
                        )
                    chain.x[idx] = new
                    on_air.append(new)
            chain.state = nxt
            state.verify()

            if q.pending_events() and chain.state not in (STALLED, DECODED):
                _release(q, i, chain, chain.x)
                return finish()


class Chaining(TailSchemeBase):
    """Chaining followed by the two-user fallback.

    :param restricted: Suppress the opportunistic combinations; overrides
      the config when given.
    """

    name = "chaining"

    def __init__(self, restricted: Optional[bool] = None) -> None:
        self._restricted = restricted

    def run(self, cfg: SimConfig, state: SimState) -> SimState:
        if self._restricted is not None and self._restricted != cfg.chaining_restricted:
            cfg = cfg.replace(chaining_restricted=self._restricted)
        roles = select_roles(cfg, state)
        run_chaining(cfg, state, roles)
        events = state.queues.pending_events()
        if state.queues.active_users:
            run_two_user_fallback(cfg, state, events[0] if events else None)
        return state


###############################################################################
# Idealized channel coding.
###############################################################################


def _pools(q: QueueSystem) -> Dict[UserMask, List[int]]:
    pools = {m: list(q.queue(m)) for m in range(1, 8) if q.size(m)}
    if q.qstar_size and q.builder is not None:
        bm = 1 << q.builder
        pools[bm] = q.qstar_symbols() + pools.get(bm, [])
    return pools


def _top_up_symbol(q: QueueSystem, user: int) -> Optional[int]:
    s = q.single(user)
    if s is not None:
        return s
    masks = sorted(
        (m for m in range(1, 8) if m >> user & 1 and q.size(m)),
        key=lambda m: (bin(m).count("1"), m),
    )
    return q.head(masks[0]) if masks else None


def run_preprocess_coding(cfg: SimConfig, state: SimState) -> SimState:
    """Charge the preprocessing LP's latency for the remaining demands.

    The optimal δ split is applied symbol by symbol (⌈δN⌉ symbols per coded
    queue), each coded symbol costing 1/(1 - max ε over its targets). A
    user still short after rounding takes the rest from the smallest queue
    holding symbols it needs. No erasure patterns are drawn.

    :raises InfeasibleException: if the queues cannot meet the demands.
    """
    q = state.queues
    for u in q.pending_events():
        q.retire(u)
    if not q.active_users:
        return state
    n = cfg.n_symbols
    eps = cfg.eps
    pools = _pools(q)
    sizes = {m: len(pool) / n for m, pool in pools.items()}
    demands = [
        max(0, q.thresholds[u] - q.received[u]) / n if not q.retired[u] else 0.0
        for u in range(3)
    ]
    solution = solve_queue_lp(sizes, demands, eps)
    logger.info(
        "Preprocess coding: LP latency %.6f for demands %s.", solution.latency, demands
    )

    base = state.slot
    cost = 0.0
    taken = {m: 0 for m in pools}
    for (source, target), delta in sorted(solution.deltas.items()):
        count = min(math.ceil(delta * n - COST_SLACK), len(pools[source]) - taken[source])
        if count <= 0:
            continue
        symbols = pools[source][taken[source] : taken[source] + count]
        taken[source] += count
        per_symbol = 1.0 / (1.0 - max(eps[u] for u in users_of(target)))
        for s in symbols:
            cost += per_symbol
            for u in users_of(target):
                q.deliver(u, s, base + math.ceil(cost - COST_SLACK))
        if cfg.trace:
            state.trace.append(
                f"{base + math.ceil(cost - COST_SLACK)},preprocess_coding,,,,"
                f"Q_{mask_label(source)}->{mask_label(target)}:{count}"
            )

    for u in q.active_users:
        while not q.is_satisfied(u):
            s = _top_up_symbol(q, u)
            if s is None:
                raise InfeasibleException(
                    f"User {u + 1} needs {q.thresholds[u] - q.received[u]} more symbols"
                    " than the queues hold."
                )
            cost += 1.0 / (1.0 - eps[u])
            q.deliver(u, s, base + math.ceil(cost - COST_SLACK))

    slots = max(0, math.ceil(cost - COST_SLACK))
    state.idealized_slots += slots
    state.phase_slots["tail"] += slots
    for u in list(q.active_users):
        q.retire(u)
    state.verify()
    return state


class PreprocessCoding(TailSchemeBase):
    """Idealized channel coding on the preprocessed queues."""

    name = "preprocess_coding"

    def run(self, cfg: SimConfig, state: SimState) -> SimState:
        return run_preprocess_coding(cfg, state)


###############################################################################
# Registry.
###############################################################################


tail_schemes: Dict[str, Type[TailSchemeBase]] = {
    "chaining": Chaining,
    "preprocess_coding": PreprocessCoding,
}


def create_tail_scheme(name: str, **kwargs) -> TailSchemeBase:
    """Instantiates the tail scheme with the name 'name'.

    :raise KeyError: If there is no tail scheme with the passed name.
    """
    try:
        scheme_class = tail_schemes[name]
    except KeyError:
        raise KeyError(
            "No tail scheme with the name '%s' could be found."
            " All possible names are: %s" % (name, list(tail_schemes.keys()))
        )
    return scheme_class(**kwargs)
