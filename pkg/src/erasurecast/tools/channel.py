"""Erasure patterns of the three-user broadcast channel.

A pattern row is (z_1, z_2, z_3) with True meaning erased. The random
channel draws rows in fixed blocks from its own generator, so the sequence
of patterns is a function of the seed alone and does not depend on how many
rows each coding phase looks ahead.
"""

from __future__ import annotations

from abc import ABCMeta, abstractmethod
from typing import List, Optional

import numpy as np

from erasurecast.utils import make_generator
from erasurecast.utils.checks import PhaseExhaustedException, RejectedInputException
from erasurecast.utils.types import Triple

__all__ = [
    "BLOCK_SIZE",
    "ChannelBase",
    "BroadcastChannel",
    "ReplayChannel",
]

BLOCK_SIZE = 4096


class ChannelBase(metaclass=ABCMeta):
    """Sequential source of erasure patterns with look-ahead.

    :param record: Keep every consumed row so the run can be replayed.
    """

    def __init__(self, record: bool = False) -> None:
        self.slot = 0
        self._buffer = np.zeros((0, 3), dtype=bool)
        self._position = 0
        self._record = record
        self._consumed: List[np.ndarray] = []

    @abstractmethod
    def _next_block(self) -> np.ndarray:
        """Return the next block of rows (shape (n, 3), bool)."""

    def peek(self, n: int, partial: bool = False) -> np.ndarray:
        """The next `n` rows without consuming them.

        :param partial: Return fewer rows instead of failing when a replayed
          sequence ends early.
        """
        while self._buffer.shape[0] - self._position < n:
            rest = self._buffer[self._position :]
            try:
                block = self._next_block()
            except PhaseExhaustedException:
                if partial and rest.shape[0] > 0:
                    break
                raise
            self._buffer = np.concatenate([rest, block])
            self._position = 0
        return self._buffer[self._position : self._position + n]

    def advance(self, n: int) -> None:
        if n < 0:
            raise RejectedInputException("Cannot advance by a negative count.")
        rows = self.peek(n)
        if self._record:
            self._consumed.append(rows.copy())
        self._position += n
        self.slot += n

    def draw(self) -> np.ndarray:
        """Consume and return one row."""
        row = self.peek(1)[0].copy()
        self.advance(1)
        return row

    def recorded(self) -> np.ndarray:
        if not self._record:
            raise RejectedInputException("This channel was not recording.")
        if not self._consumed:
            return np.zeros((0, 3), dtype=bool)
        return np.concatenate(self._consumed)


class BroadcastChannel(ChannelBase):
    """Independent erasures with per-user probabilities `eps`."""

    def __init__(self, eps: Triple, seed: int, record: bool = False) -> None:
        super().__init__(record=record)
        self._eps = np.asarray(eps, dtype=float)
        self._rng = make_generator(seed)

    def _next_block(self) -> np.ndarray:
        return self._rng.random((BLOCK_SIZE, 3)) < self._eps


class ReplayChannel(ChannelBase):
    """Feeds back a recorded sequence of patterns."""

    def __init__(self, erasures: np.ndarray, record: bool = False) -> None:
        super().__init__(record=record)
        rows = np.asarray(erasures, dtype=bool)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise RejectedInputException(f"Replay rows must have shape (n, 3), got {rows.shape}.")
        self._rows: Optional[np.ndarray] = rows

    def _next_block(self) -> np.ndarray:
        if self._rows is None or self._rows.shape[0] == 0:
            raise PhaseExhaustedException("The replayed erasure sequence ran out.")
        block, self._rows = self._rows, None
        return block
