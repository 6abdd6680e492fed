"""Slot-level simulation of the instantly decodable coding phases.

A run moves through the systematic phase, the network-coding phase and,
whenever some user is satisfied early, the two-user fallback. The tail
schemes in :mod:`erasurecast.tools.tail` and the orchestration in
:mod:`erasurecast.tools.experiment` build on the state defined here.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from erasurecast.analysis.uncoded import as_channel, as_distortion, latency_bounds, others
from erasurecast.tools.channel import BLOCK_SIZE, ChannelBase
from erasurecast.tools.queues import QueueSystem, satisfaction_threshold
from erasurecast.utils import mask_of
from erasurecast.utils.checks import InvariantViolationException, RejectedInputException
from erasurecast.utils.io import load_json
from erasurecast.utils.types import QueueSnapshotDict, Triple, UserResultDict

__all__ = [
    "SimConfig",
    "SimState",
    "SimResult",
    "RESULT_COLUMNS",
    "run_systematic",
    "run_network_coding",
    "run_two_user_fallback",
    "stopping_condition_holds",
    "describe_plan",
]

logger = logging.getLogger(__name__)

PHASES = ("systematic", "network_coding", "fallback", "tail")


###############################################################################
# Configuration.
###############################################################################


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation run.

    :param n_symbols: Number of source symbols N.
    :param eps: Erasure probabilities, each in [0, 1).
    :param d: Distortion targets, each in [0, 1].
    :param seed: Seed of the channel generator.
    :param tail_scheme: Name in :data:`erasurecast.tools.tail.tail_schemes`.
    :param chaining_restricted: Suppress the opportunistic combinations
      during chaining.
    :param trace: Keep one trace line per slot.
    :param event_handler: Hand over to the two-user fallback as soon as a
      user is satisfied. Switch off to measure the full uncoded phases.
    :param builder: Chain builder for the three-pair terminal shape.
    :param check_invariants: Verify queue conservation and membership after
      every slot.
    """

    n_symbols: int
    eps: Triple
    d: Triple
    seed: int = 0
    tail_scheme: str = "chaining"
    chaining_restricted: bool = True
    trace: bool = False
    event_handler: bool = True
    builder: Optional[int] = None
    check_invariants: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.n_symbols, bool) or not isinstance(self.n_symbols, int):
            raise RejectedInputException(f"n_symbols must be an integer, got {self.n_symbols!r}.")
        if self.n_symbols < 1:
            raise RejectedInputException(f"n_symbols must be positive, got {self.n_symbols}.")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise RejectedInputException(f"seed must be a nonnegative integer, got {self.seed!r}.")
        if self.seed >= 2**64:
            raise RejectedInputException("seed must fit in 64 bits.")
        if not isinstance(self.tail_scheme, str):
            raise RejectedInputException("tail_scheme must be a name.")
        if self.builder is not None and self.builder not in (0, 1, 2):
            raise RejectedInputException(f"builder must be 0, 1 or 2, got {self.builder}.")
        object.__setattr__(self, "eps", as_channel(self.eps).eps)
        object.__setattr__(self, "d", as_distortion(self.d).d)

    def save(self) -> Dict[str, Any]:
        """Plain-dict state, can be passed to :meth:`load`."""
        state = asdict(self)
        state["eps"] = list(self.eps)
        state["d"] = list(self.d)
        return state

    @classmethod
    def load(cls, state: Dict[str, Any]) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(state) - known
        if unknown:
            raise RejectedInputException(f"Unknown config keys: {sorted(unknown)}.")
        missing = {"n_symbols", "eps", "d"} - set(state)
        if missing:
            raise RejectedInputException(f"Missing config keys: {sorted(missing)}.")
        kwargs = dict(state)
        kwargs["eps"] = tuple(kwargs["eps"])
        kwargs["d"] = tuple(kwargs["d"])
        return cls(**kwargs)

    def save_json(self, fname: str) -> None:
        with open(fname, "w") as f:
            json.dump(self.save(), f, indent=2, sort_keys=True)

    @classmethod
    def load_json(cls, fname: str) -> "SimConfig":
        return cls.load(load_json(fname))

    def replace(self, **changes: Any) -> "SimConfig":
        state = self.save()
        state.update(changes)
        return SimConfig.load(state)


###############################################################################
# Mutable run state and the frozen result.
###############################################################################


RESULT_COLUMNS = (
    "seed",
    "N",
    "eps1",
    "eps2",
    "eps3",
    "d1",
    "d2",
    "d3",
    "slots_systematic",
    "slots_nc",
    "slots_tail",
    "latency",
    "w_plus",
    "dist1",
    "dist2",
    "dist3",
    "t_hat0",
    "t_hat1",
    "t_hat2",
    "t_hat3",
    "tail_scheme",
    "slots_triple",
)


@dataclass(frozen=True)
class SimResult:
    """Measurements of one run. All slot counts are channel uses."""

    seed: int
    n_symbols: int
    eps: Triple
    d: Triple
    phase_slots: Dict[str, int]
    latency: float
    w_plus: float
    per_user: Tuple[UserResultDict, UserResultDict, UserResultDict]
    t_hat: Tuple[float, float, float, float]
    pairing_slots: Tuple[int, int, int]
    triple_slots: int
    tail_scheme_used: Optional[str]
    transition_counts: Tuple[Tuple[int, ...], ...]
    absorptions: Dict[int, int]
    builder_decodes: Tuple[int, ...]
    snapshots: Tuple[QueueSnapshotDict, ...]
    trace: Tuple[str, ...] = ()

    @property
    def total_slots(self) -> int:
        return sum(self.phase_slots.values())

    @property
    def uncoded_latency(self) -> float:
        """Systematic plus pairing slots per source symbol."""
        return sum(self.t_hat)

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "seed": self.seed,
            "N": self.n_symbols,
            "slots_systematic": self.phase_slots["systematic"],
            "slots_nc": self.phase_slots["network_coding"],
            "slots_tail": self.phase_slots["tail"] + self.phase_slots["fallback"],
            "latency": self.latency,
            "w_plus": self.w_plus,
            "tail_scheme": self.tail_scheme_used or "",
            "slots_triple": self.triple_slots,
        }
        for u in range(3):
            row[f"eps{u + 1}"] = self.eps[u]
            row[f"d{u + 1}"] = self.d[u]
            row[f"dist{u + 1}"] = self.per_user[u]["distortion"]
        for i, t in enumerate(self.t_hat):
            row[f"t_hat{i}"] = t
        return row


class SimState:
    """Everything that changes while a run proceeds."""

    def __init__(self, cfg: SimConfig, channel: ChannelBase) -> None:
        self.cfg = cfg
        self.channel = channel
        self.queues = QueueSystem(
            cfg.n_symbols, [satisfaction_threshold(cfg.n_symbols, d) for d in cfg.d]
        )
        self.phase_slots = {name: 0 for name in PHASES}
        # Slots charged by the idealized channel-coding tail without drawing
        # erasure patterns.
        self.idealized_slots = 0
        self.pairing_slots = [0, 0, 0]
        self.triple_slots = 0
        self.tail_scheme_used: Optional[str] = None
        self.transition_counts = np.zeros((6, 6), dtype=np.int64)
        self.absorptions = {5: 0, 6: 0}
        self.builder_decodes: List[int] = []
        self.snapshots: List[QueueSnapshotDict] = []
        self.trace: List[str] = []

    @property
    def slot(self) -> int:
        return self.channel.slot + self.idealized_slots

    def log_slot(self, phase: str, z: np.ndarray, action: str) -> None:
        if self.cfg.trace:
            zs = ",".join(str(int(v)) for v in z)
            self.trace.append(f"{self.slot},{phase},{zs},{action}")

    def snapshot(self, phase: str) -> None:
        self.snapshots.append(
            QueueSnapshotDict(phase=phase, slot=self.slot, sizes=self.queues.sizes())
        )

    def verify(self) -> None:
        if self.cfg.check_invariants:
            self.queues.check()

    def result(self) -> SimResult:
        cfg, q = self.cfg, self.queues
        n = cfg.n_symbols
        per_user = tuple(
            UserResultDict(
                distortion=min(1.0, max(0.0, 1.0 - q.received[u] / n)),
                reconstructed=q.received[u],
                receptions=q.received[u],
                discarded=q.discarded[u],
                satisfied_slot=q.satisfied_slot[u],
            )
            for u in range(3)
        )
        return SimResult(
            seed=cfg.seed,
            n_symbols=n,
            eps=cfg.eps,
            d=cfg.d,
            phase_slots=dict(self.phase_slots),
            latency=self.slot / n,
            w_plus=latency_bounds(cfg.eps, cfg.d).w_plus,
            per_user=per_user,  # type: ignore[arg-type]
            t_hat=(
                self.phase_slots["systematic"] / n,
                self.pairing_slots[0] / n,
                self.pairing_slots[1] / n,
                self.pairing_slots[2] / n,
            ),
            pairing_slots=tuple(self.pairing_slots),  # type: ignore[arg-type]
            triple_slots=self.triple_slots,
            tail_scheme_used=self.tail_scheme_used,
            transition_counts=tuple(tuple(int(v) for v in row) for row in self.transition_counts),
            absorptions=dict(self.absorptions),
            builder_decodes=tuple(self.builder_decodes),
            snapshots=tuple(self.snapshots),
            trace=tuple(self.trace),
        )


###############################################################################
# Systematic phase.
###############################################################################

_BIT_WEIGHTS = np.array([1, 2, 4], dtype=np.uint8)


def run_systematic(cfg: SimConfig, state: SimState) -> SimState:
    """Send every source symbol uncoded until some active user receives it.

    Patterns are processed a block at a time: a symbol ends at the first row
    in which an active user receives, so the successful rows of a block
    determine which symbol each row carried. With the event handler on, the
    phase stops right after the slot in which the first user is satisfied.
    """
    q = state.queues
    channel = state.channel
    n = cfg.n_symbols
    active = q.active_mask
    active_bits = np.array([(active >> u) & 1 for u in range(3)], dtype=bool)
    thresholds = np.array(q.thresholds)
    start = channel.slot

    next_symbol = 0
    cut = False
    while next_symbol < n and not cut:
        base = channel.slot
        rows = channel.peek(BLOCK_SIZE, partial=True)
        hits_all = ~rows & active_bits
        success = np.flatnonzero(hits_all.any(axis=1))
        if success.size == 0:
            _trace_systematic(state, rows, success, next_symbol)
            channel.advance(rows.shape[0])
            continue

        take = min(success.size, n - next_symbol)
        success = success[:take]
        hits = hits_all[success]
        cumulative = np.cumsum(hits, axis=0) + np.array(q.received)
        reached = (cumulative >= thresholds) & active_bits
        if cfg.event_handler:
            first = np.flatnonzero(reached.any(axis=1))
            if first.size > 0:
                take = int(first[0]) + 1
                success, hits = success[:take], hits[:take]
                reached, cumulative = reached[:take], cumulative[:take]
                cut = True

        for u in range(3):
            rows_reached = np.flatnonzero(reached[:, u])
            if rows_reached.size > 0 and q.satisfied_slot[u] < 0:
                q.satisfied_slot[u] = base + int(success[rows_reached[0]]) + 1

        used = int(success[-1]) + 1
        symbols = np.arange(next_symbol, next_symbol + take)
        receivers = hits.astype(np.uint8) @ _BIT_WEIGHTS
        q.need[symbols] = np.uint8(active) & ~receivers.astype(np.uint8)
        q.add_receptions(hits.sum(axis=0), base + used)
        _trace_systematic(state, rows[:used], success, next_symbol)
        channel.advance(used)
        next_symbol += take

    q.push_many(np.flatnonzero(q.need).tolist())
    state.phase_slots["systematic"] += channel.slot - start
    state.verify()
    logger.info(
        "Systematic phase: %d slots, %d of %d symbols sent%s.",
        channel.slot - start,
        next_symbol,
        n,
        " (stopped by a satisfied user)" if cut else "",
    )
    return state


def _trace_systematic(
    state: SimState, rows: np.ndarray, success: np.ndarray, first_symbol: int
) -> None:
    if not state.cfg.trace:
        return
    carried = first_symbol + np.searchsorted(success, np.arange(rows.shape[0]), side="left")
    base = state.slot
    for r, (z, s) in enumerate(zip(rows, carried)):
        zs = ",".join(str(int(v)) for v in z)
        state.trace.append(f"{base + r + 1},systematic,{zs},x{s}")


###############################################################################
# Network-coding phase.
###############################################################################


def _network_coding_plan(q: QueueSystem) -> Optional[Tuple[int, Dict[int, int]]]:
    """Pairing index (0-2, or 3 for the triple) and the symbol each user
    decodes on reception."""
    for i in range(3):
        j, k = others(i)
        a, b = q.head(1 << i), q.head(mask_of([j, k]))
        if a is not None and b is not None:
            return i, {i: a, j: b, k: b}
    heads = [q.head(1 << u) for u in range(3)]
    if all(h is not None for h in heads):
        return 3, {u: h for u, h in enumerate(heads)}  # type: ignore[misc]
    return None


def describe_plan(plan: Dict[int, int]) -> str:
    return "+".join(f"x{s}" for s in dict.fromkeys(plan.values()))


def stopping_condition_holds(q: QueueSystem) -> bool:
    """Network coding has nothing left: for every i, Q_i or Q_{U∖i} is
    empty, and some Q_l is empty."""
    for i in range(3):
        j, k = others(i)
        if q.size(1 << i) and q.size(mask_of([j, k])):
            return False
    return any(q.size(1 << u) == 0 for u in range(3))


def run_network_coding(cfg: SimConfig, state: SimState) -> SimState:
    """Send q_i ⊕ q_{j,k} pairings, then q_1 ⊕ q_2 ⊕ q_3, while queues allow.

    Every reception is instantly decodable: each receiving user already holds
    all but one symbol of the combination.
    """
    q = state.queues
    start = state.channel.slot
    interrupted = False
    while True:
        if cfg.event_handler and q.pending_events():
            interrupted = True
            break
        choice = _network_coding_plan(q)
        if choice is None:
            break
        kind, plan = choice
        z = state.channel.draw()
        for u, s in plan.items():
            if not z[u]:
                innovative = q.deliver(u, s, state.slot)
                if cfg.check_invariants and not innovative and not q.retired[u]:
                    raise InvariantViolationException(
                        f"User {u + 1} received x{s} without learning anything."
                    )
        if kind == 3:
            state.triple_slots += 1
        else:
            state.pairing_slots[kind] += 1
        state.log_slot("network_coding", z, describe_plan(plan))
        state.verify()

    if cfg.check_invariants and not interrupted and not stopping_condition_holds(q):
        raise InvariantViolationException("Network coding stopped with combinations left.")
    state.phase_slots["network_coding"] += state.channel.slot - start
    logger.info(
        "Network coding: %d slots (pairings %s, triples %d).",
        state.channel.slot - start,
        state.pairing_slots,
        state.triple_slots,
    )
    return state


###############################################################################
# Two-user fallback.
###############################################################################


def _fallback_plan(q: QueueSystem) -> Optional[Dict[int, int]]:
    users = q.active_users
    if len(users) == 2:
        a, b = users
        sa, sb = q.single(a), q.single(b)
        if sa is not None and sb is not None:
            return {a: sa, b: sb}
        shared = q.head(mask_of(users))
        if shared is not None:
            return {a: shared, b: shared}
        if sa is not None:
            return {a: sa}
        if sb is not None:
            return {b: sb}
    elif len(users) == 1:
        s = q.single(users[0])
        if s is not None:
            return {users[0]: s}
    return None


def _retire_satisfied(q: QueueSystem) -> List[int]:
    done = q.pending_events()
    for u in done:
        q.retire(u)
    return done


def run_two_user_fallback(
    cfg: SimConfig, state: SimState, satisfied_user: Optional[int] = None
) -> SimState:
    """Serve the users left once one is satisfied.

    The satisfied user's queues are discarded: Q_j merges with Q_{sat,j}, Q_k
    with Q_{sat,k}, and Q_{j,k} is treated like unsent systematic symbols.
    Each slot then sends, in order of preference, q_j ⊕ q_k (Q* first for
    the chain builder), a Q_{j,k} symbol uncoded, or a single-user symbol
    uncoded. Users retire as soon as they are satisfied.
    """
    q = state.queues
    if satisfied_user is not None and not q.is_satisfied(satisfied_user):
        raise RejectedInputException(f"User {satisfied_user + 1} is not satisfied.")
    retired = _retire_satisfied(q)
    logger.info(
        "Two-user fallback at slot %d, retired users %s.", state.slot, [u + 1 for u in retired]
    )
    start = state.channel.slot
    while q.active_users:
        plan = _fallback_plan(q)
        if plan is None:
            raise InvariantViolationException(
                f"Users {[u + 1 for u in q.active_users]} unsatisfied with nothing left to send."
            )
        z = state.channel.draw()
        for u, s in plan.items():
            if not z[u]:
                q.deliver(u, s, state.slot)
        state.log_slot("fallback", z, describe_plan(plan))
        _retire_satisfied(q)
        state.verify()
    state.phase_slots["fallback"] += state.channel.slot - start
    return state
