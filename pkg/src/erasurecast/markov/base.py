from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List

import numpy as np

from erasurecast.linalg import Matrix, identity, inverse, multiply, parse_matrices, subtract
from erasurecast.utils.checks import (
    NotAbsorbingException,
    NumericFailureException,
    RejectedInputException,
    check_stochastic_rows,
)

__all__ = [
    "MrpSpec",
    "CanonicalMrp",
    "canonicalize",
    "read_mrp",
]

# p_ii within this distance of 1 (and all other row entries within it of 0)
# marks an absorbing state.
ABSORBING_TOL = 1e-12
# Transitions above this probability count as edges for reachability.
EDGE_TOL = 1e-15


@dataclass(frozen=True)
class MrpSpec:
    """A discrete-time Markov reward process with impulse rewards.

    :param transition: Row-stochastic |Ω|x|Ω| matrix, entry (i, j) = p_ij.
    :param reward: |Ω|x|Ω| matrix of impulse rewards θ_ij earned on the
      transition i -> j.
    """

    transition: Matrix
    reward: Matrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "transition", Matrix(self.transition))
        object.__setattr__(self, "reward", Matrix(self.reward))
        if not self.transition.is_square:
            raise RejectedInputException("Transition matrix must be square.")
        if self.reward.shape != self.transition.shape:
            raise RejectedInputException(
                "Reward matrix shape {} does not match transition shape {}.".format(
                    self.reward.shape, self.transition.shape
                )
            )
        check_stochastic_rows(self.transition.entries)

    @property
    def num_states(self) -> int:
        return self.transition.rows

    @classmethod
    def from_text(cls, text: str) -> "MrpSpec":
        """Two matrices in text format, transition first, separated by a
        blank line."""
        matrices = parse_matrices(text)
        if len(matrices) != 2:
            raise RejectedInputException(
                f"MRP text must hold exactly two matrices, found {len(matrices)}."
            )
        return cls(matrices[0], matrices[1])

    def to_text(self) -> str:
        return self.transition.to_text() + "\n" + self.reward.to_text()


def read_mrp(path: str) -> MrpSpec:
    with open(path) as f:
        return MrpSpec.from_text(f.read())


###############################################################################


@dataclass(frozen=True)
class CanonicalMrp:
    """An absorbing MRP rearranged into the block form [[Q, R], [0, I]].

    `permutation[c]` is the original (0-based) index of the state at
    canonical position c. Transient states come first, each group in
    increasing original order.
    """

    spec: MrpSpec
    permutation: np.ndarray
    n_transient: int
    q_block: Matrix
    r_block: Matrix
    h1_block: Matrix
    h2_block: Matrix
    fundamental: Matrix

    @property
    def num_states(self) -> int:
        return self.spec.num_states

    @property
    def n_absorbing(self) -> int:
        return self.num_states - self.n_transient

    @property
    def transient_states(self) -> List[int]:
        return [int(s) for s in self.permutation[: self.n_transient]]

    @property
    def absorbing_states(self) -> List[int]:
        return [int(s) for s in self.permutation[self.n_transient :]]

    def canonical_index(self, state: int) -> int:
        if not 0 <= state < self.num_states:
            raise RejectedInputException(f"State {state} is out of range.")
        return int(np.flatnonzero(self.permutation == state)[0])

    def is_transient(self, state: int) -> bool:
        return self.canonical_index(state) < self.n_transient

    def to_original(self, matrix: Matrix) -> Matrix:
        """Reorder a full matrix from canonical to original state order."""
        inv = np.argsort(self.permutation)
        return Matrix(np.asarray(matrix.entries)[np.ix_(inv, inv)])

    def full_transition(self) -> Matrix:
        """P in canonical order."""
        p = self.spec.transition.entries
        return Matrix(p[np.ix_(self.permutation, self.permutation)])

    def full_h(self) -> Matrix:
        """H = Θ ⊙ P in canonical order, zero on rows of absorbing states."""
        nt, na = self.n_transient, self.n_absorbing
        return Matrix(
            np.block(
                [
                    [self.h1_block.entries, self.h2_block.entries],
                    [np.zeros((na, nt)), np.zeros((na, na))],
                ]
            )
        )


def _absorbing_mask(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    mask = np.zeros(n, dtype=bool)
    for s in range(n):
        off = np.delete(p[s], s)
        mask[s] = abs(p[s, s] - 1.0) <= ABSORBING_TOL and bool(
            np.all(np.abs(off) <= ABSORBING_TOL)
        )
    return mask


def _reaches(p: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """States with a directed path into `targets` (reverse breadth-first)."""
    n = p.shape[0]
    edges = p > EDGE_TOL
    seen = targets.copy()
    queue = deque(np.flatnonzero(targets).tolist())
    while queue:
        t = queue.popleft()
        for s in np.flatnonzero(edges[:, t]):
            if not seen[s]:
                seen[s] = True
                queue.append(int(s))
    return seen


def canonicalize(spec: MrpSpec) -> CanonicalMrp:
    """Detect absorbing states and split P and H into canonical blocks.

    :raises NotAbsorbingException: if there is no absorbing state or a
      transient state cannot reach one.
    """
    p = spec.transition.entries
    absorbing = _absorbing_mask(p)
    if not absorbing.any():
        raise NotAbsorbingException("The chain has no absorbing state.")
    if absorbing.all():
        raise RejectedInputException("The chain needs at least one transient state.")

    stuck = np.flatnonzero(~_reaches(p, absorbing))
    if stuck.size > 0:
        raise NotAbsorbingException(
            "State(s) {} cannot reach an absorbing state.".format((stuck + 1).tolist())
        )

    transient = np.flatnonzero(~absorbing)
    absorbing_idx = np.flatnonzero(absorbing)
    perm = np.concatenate([transient, absorbing_idx])
    h = spec.reward.entries * p

    q = Matrix(p[np.ix_(transient, transient)])
    r = Matrix(p[np.ix_(transient, absorbing_idx)])
    h1 = Matrix(h[np.ix_(transient, transient)])
    h2 = Matrix(h[np.ix_(transient, absorbing_idx)])

    i_minus_q = subtract(identity(q.rows), q)
    fundamental = inverse(i_minus_q)
    if not multiply(fundamental, i_minus_q).allclose(identity(q.rows), atol=1e-9):
        raise NumericFailureException("Fundamental matrix failed the residual check.")

    perm.setflags(write=False)
    return CanonicalMrp(
        spec=spec,
        permutation=perm,
        n_transient=int(transient.size),
        q_block=q,
        r_block=r,
        h1_block=h1,
        h2_block=h2,
        fundamental=fundamental,
    )


def random_absorbing_spec(
    rng: np.random.Generator,
    num_states: int,
    num_absorbing: int = 1,
    max_q_row_sum: float = 1.0,
    reward_scale: float = 1.0,
    density: float = 1.0,
) -> MrpSpec:
    """Random absorbing spec for property tests and sweeps.

    The last `num_absorbing` states are absorbing and every transient row
    sends at least 5% of its mass into absorption, so the chain is
    absorbing for any draw.
    """
    if not 1 <= num_absorbing < num_states:
        raise RejectedInputException("Need 1 <= num_absorbing < num_states.")
    nt = num_states - num_absorbing
    p = np.zeros((num_states, num_states))
    for s in range(nt):
        weights = rng.random(num_states) * (rng.random(num_states) < density)
        weights[nt + rng.integers(num_absorbing)] += 0.05 * weights.sum() + 0.05
        row = weights / weights.sum()
        q_mass = row[:nt].sum()
        if q_mass > max_q_row_sum:
            row[:nt] *= max_q_row_sum / q_mass
            row[nt:] *= (1.0 - row[:nt].sum()) / row[nt:].sum()
        p[s] = row
    for s in range(nt, num_states):
        p[s, s] = 1.0
    theta = rng.random((num_states, num_states)) * reward_scale
    return MrpSpec(Matrix(p), Matrix(theta))


__all__ += ["random_absorbing_spec"]
