from __future__ import annotations

from typing import Iterator, List, Sequence

import numpy as np

from erasurecast.utils.checks import RejectedInputException
from erasurecast.utils.types import UserMask

__all__ = [
    "make_generator",
    "spawn_generators",
    "SHARD_SIZE",
    "shard_sizes",
    "mask_of",
    "users_of",
    "mask_label",
    "parse_float_list",
]


# Monte-Carlo jobs are cut into shards of this many trials. Each shard gets
# its own child seed, so results do not depend on the number of workers.
SHARD_SIZE = 1 << 16


def make_generator(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the only source of randomness in the package."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_generators(seed: int, n: int) -> List[np.random.Generator]:
    """Per-shard generators: shard k uses `SeedSequence(seed).spawn(n)[k]`."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def shard_sizes(total: int, shard: int = SHARD_SIZE) -> List[int]:
    full, rest = divmod(total, shard)
    return [shard] * full + ([rest] if rest else [])


###############################################################################


def mask_of(users: Sequence[int]) -> UserMask:
    mask = 0
    for u in users:
        mask |= 1 << u
    return mask


def users_of(mask: UserMask) -> Iterator[int]:
    u = 0
    while mask:
        if mask & 1:
            yield u
        mask >>= 1
        u += 1


def mask_label(mask: UserMask) -> str:
    """Queue label with 1-based user indices, e.g. 0b110 -> "23"."""
    return "".join(str(u + 1) for u in users_of(mask))


def parse_float_list(text: str, name: str = "value") -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as e:
        raise RejectedInputException(f"Cannot parse {name} list {text!r}.") from e
