"""Custom types used in erasurecast"""

from typing import Dict, Sequence, Tuple

from typing_extensions import Literal, TypedDict

# Per-user triples are always indexed by user 0, 1, 2.
Triple = Tuple[float, float, float]

# A set of users encoded as a bitmask: bit u set <=> user u is in the set.
UserMask = int

# Constraint rows a·x <= bound for the small LP solver.
Constraint = Tuple[Sequence[float], float]

ChainRewardName = Literal["rho_j", "rho_k", "rho_E", "rho_Qi", "rho_Qj", "rho_Qk", "rho_Qstar"]


class UserResultDict(TypedDict):
    """Adds type hints to the per-user block of a simulation result."""

    distortion: float
    reconstructed: int
    receptions: int
    discarded: int
    satisfied_slot: int


class QueueSnapshotDict(TypedDict):
    """Queue sizes at a phase boundary, keyed by queue label ("1", "23", "*", ...)."""

    phase: str
    slot: int
    sizes: Dict[str, int]
