"""Queue bookkeeping shared by every coding phase.

Each source symbol carries the set of active users that still need it (a
user bitmask). A queued symbol always sits in the queue whose mask equals
that set, so feedback only has to update the need set and the symbol moves
by itself. Symbols taken out for transmission (chain symbols, parked chain
members) keep their need set but live in no queue.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from erasurecast.utils import mask_label, mask_of, users_of
from erasurecast.utils.checks import InvariantViolationException, RejectedInputException
from erasurecast.utils.types import UserMask

__all__ = [
    "ALL_USERS",
    "QSTAR",
    "THRESHOLD_SLACK",
    "satisfaction_threshold",
    "QueueSystem",
]

ALL_USERS: UserMask = 0b111
# Location code of the builder's priority queue.
QSTAR = 8
# Location code of a symbol that is in no queue.
NOWHERE = -1
THRESHOLD_SLACK = 1e-9


def satisfaction_threshold(n_symbols: int, d: float) -> int:
    """⌈N(1 - d)⌉ symbols."""
    return max(0, math.ceil(n_symbols * (1.0 - d) - THRESHOLD_SLACK))


class QueueSystem:
    """Queues Q_U for every nonempty user set U, the priority queue Q* and
    the per-user reconstruction counters.

    Q_{123} holds symbols no user has received yet (unsent systematic
    symbols). Once users retire it becomes the queue of symbols every
    remaining user needs.

    :param n_symbols: Number of source symbols N.
    :param thresholds: Receptions each user needs to be satisfied.
    """

    def __init__(self, n_symbols: int, thresholds: Sequence[int]) -> None:
        if n_symbols < 1:
            raise RejectedInputException(f"n_symbols must be positive, got {n_symbols}.")
        self.n_symbols = n_symbols
        self.thresholds = [int(t) for t in thresholds]
        self.need = np.full(n_symbols, ALL_USERS, dtype=np.uint8)
        self._loc = np.full(n_symbols, NOWHERE, dtype=np.int8)
        self._queues: Dict[UserMask, "OrderedDict[int, None]"] = {
            m: OrderedDict() for m in range(1, 8)
        }
        self._qstar: "OrderedDict[int, None]" = OrderedDict()
        self._parked: Dict[int, List[int]] = {}
        self.builder: Optional[int] = None

        self.received = [0, 0, 0]
        self.discarded = [0, 0, 0]
        self.satisfied_slot = [-1, -1, -1]
        self.retired = [False, False, False]

    ###########################################################################
    # Users.
    ###########################################################################

    @property
    def active_mask(self) -> UserMask:
        return mask_of([u for u in range(3) if not self.retired[u]])

    @property
    def active_users(self) -> List[int]:
        return [u for u in range(3) if not self.retired[u]]

    def is_satisfied(self, user: int) -> bool:
        return self.received[user] >= self.thresholds[user]

    def pending_events(self) -> List[int]:
        """Active users that are satisfied, lowest index first."""
        return [u for u in self.active_users if self.is_satisfied(u)]

    def all_satisfied(self) -> bool:
        return all(self.is_satisfied(u) for u in range(3))

    def owed(self, user: int) -> int:
        return int(((self.need >> user) & 1).sum())

    def _mark(self, user: int, slot: int) -> None:
        if self.satisfied_slot[user] < 0 and self.is_satisfied(user):
            self.satisfied_slot[user] = slot

    def retire(self, user: int) -> None:
        """Stop serving `user`: its remaining needs are discarded and every
        queue containing it merges into the queue without it."""
        if self.retired[user]:
            return
        bit = 1 << user
        owed = ((self.need & bit) != 0)
        self.discarded[user] += int(owed.sum())
        self.need[owed] &= np.uint8(~bit & ALL_USERS)
        self.retired[user] = True

        for m in sorted(self._queues):
            if not m & bit:
                continue
            moved = list(self._queues[m])
            self._queues[m].clear()
            for s in moved:
                self._loc[s] = NOWHERE
                self.push(s)
        if user == self.builder:
            for s in self._qstar:
                self._loc[s] = NOWHERE
            self._qstar.clear()
            self._parked.clear()

    ###########################################################################
    # Queues.
    ###########################################################################

    def queue(self, mask: UserMask) -> "OrderedDict[int, None]":
        return self._queues[mask]

    def size(self, mask: UserMask) -> int:
        return len(self._queues[mask])

    def head(self, mask: UserMask) -> Optional[int]:
        q = self._queues[mask]
        return next(iter(q)) if q else None

    def pop(self, mask: UserMask) -> Optional[int]:
        q = self._queues[mask]
        if not q:
            return None
        s, _ = q.popitem(last=False)
        self._loc[s] = NOWHERE
        return s

    def push(self, symbol: int) -> None:
        """Put a symbol that is in no queue into the queue of its need set."""
        if self._loc[symbol] != NOWHERE:
            raise InvariantViolationException(f"Symbol {symbol} is already queued.")
        m = int(self.need[symbol])
        if m:
            self._queues[m][symbol] = None
            self._loc[symbol] = m

    def push_many(self, symbols: Sequence[int]) -> None:
        for s in symbols:
            self.push(int(s))

    def _relocate(self, symbol: int) -> None:
        loc = int(self._loc[symbol])
        m = int(self.need[symbol])
        if loc == NOWHERE or loc == m:
            return
        if loc == QSTAR:
            if not m:
                del self._qstar[symbol]
                self._loc[symbol] = NOWHERE
            return
        del self._queues[loc][symbol]
        self._loc[symbol] = NOWHERE
        self.push(symbol)

    ###########################################################################
    # Q* and stalled chains.
    ###########################################################################

    @property
    def qstar_size(self) -> int:
        return len(self._qstar)

    @property
    def parked_size(self) -> int:
        return sum(len(chain) for chain in self._parked.values())

    def park(self, builder: int, key: int, chain: Sequence[int]) -> None:
        """Queue `key` for the builder; delivering it unlocks `chain`."""
        if self.builder is not None and self.builder != builder:
            raise RejectedInputException("Only one chain builder per run.")
        self.builder = builder
        if self._loc[key] != NOWHERE:
            raise InvariantViolationException(f"Symbol {key} is already queued.")
        self._qstar[key] = None
        self._loc[key] = QSTAR
        self._parked[key] = [int(s) for s in chain if s != key]

    def single(self, user: int) -> Optional[int]:
        """Next symbol only `user` needs; Q* goes first for the builder."""
        if user == self.builder and self._qstar:
            return next(iter(self._qstar))
        return self.head(1 << user)

    def singles_for(self, user: int) -> int:
        extra = self.qstar_size if user == self.builder else 0
        return self.size(1 << user) + extra

    ###########################################################################
    # Reception.
    ###########################################################################

    def deliver(self, user: int, symbol: int, slot: int) -> bool:
        """Record that `user` reconstructed `symbol`.

        :returns: True if this was a new symbol the user still needed.
        """
        if self.retired[user]:
            return False
        bit = 1 << user
        if not self.need[symbol] & bit:
            return False
        self.need[symbol] &= np.uint8(~bit & ALL_USERS)
        self.received[user] += 1
        self._relocate(symbol)
        self._mark(user, slot)
        if user == self.builder and symbol in self._parked:
            for s in self._parked.pop(symbol):
                self.deliver(user, s, slot)
        return True

    def add_receptions(self, counts: Sequence[int], slot: int) -> None:
        """Bulk counter update used by the vectorized systematic phase."""
        for u in range(3):
            self.received[u] += int(counts[u])
            self._mark(u, slot)

    ###########################################################################
    # Reporting and checks.
    ###########################################################################

    def sizes(self) -> Dict[str, int]:
        found = {mask_label(m): len(q) for m, q in sorted(self._queues.items())}
        found["*"] = len(self._qstar)
        return found

    def is_queued(self, symbol: int) -> bool:
        return int(self._loc[symbol]) != NOWHERE

    def qstar_symbols(self) -> List[int]:
        return list(self._qstar)

    def queued(self) -> Iterator[int]:
        for q in self._queues.values():
            yield from q
        yield from self._qstar

    def check(self) -> None:
        """Raise if conservation or queue membership is violated."""
        for u in range(3):
            total = self.received[u] + self.owed(u) + self.discarded[u]
            if total != self.n_symbols:
                raise InvariantViolationException(
                    f"User {u + 1}: {self.received[u]} received + {self.owed(u)} owed"
                    f" + {self.discarded[u]} discarded != {self.n_symbols}."
                )
        seen = set()
        for m, q in self._queues.items():
            for s in q:
                if s in seen:
                    raise InvariantViolationException(f"Symbol {s} is in two queues.")
                seen.add(s)
                if int(self.need[s]) != m:
                    raise InvariantViolationException(
                        f"Symbol {s} sits in Q_{mask_label(m)} but is needed by"
                        f" {sorted(u + 1 for u in users_of(int(self.need[s])))}."
                    )
        for s in self._qstar:
            if s in seen:
                raise InvariantViolationException(f"Symbol {s} is in Q* and another queue.")
            if self.builder is None or int(self.need[s]) != 1 << self.builder:
                raise InvariantViolationException(f"Q* symbol {s} is not builder-only.")
