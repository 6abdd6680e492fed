"""Paths and small builders shared by the test modules."""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
CHAIN_MRP = os.path.join(DATA_DIR, "chain.mrp")


def erasure_rows(patterns: Sequence[str]) -> np.ndarray:
    """Rows like "010" (user 2 erased) as a bool array for ReplayChannel."""
    return np.array([[c == "1" for c in p] for p in patterns], dtype=bool)
