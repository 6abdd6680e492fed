"""Exact vertex-enumeration solver for small linear programs.

The queue LPs in this package have at most ten variables, so every vertex
of the feasible polyhedron can be listed: pick n facets, solve the n x n
system, keep the solution if it satisfies every other facet. This is slow
in general but has no pivoting rules and no degenerate-cycle corner cases,
which makes it a trustworthy oracle for the faster solvers.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from erasurecast.utils.checks import (
    InfeasibleException,
    RejectedInputException,
    UnboundedException,
)
from erasurecast.utils.types import Constraint

__all__ = [
    "LpResult",
    "solve_small_lp",
    "MAX_VARIABLES",
    "MAX_CONSTRAINTS",
]

MAX_VARIABLES = 10
MAX_CONSTRAINTS = 24

FEASIBILITY_TOL = 1e-9
UNIQUENESS_TOL = 1e-7
# Minimum |det| of a unit-row facet system for it to define a vertex.
DET_TOL = 1e-10
# Facet subsets handled per vectorized batch.
CHUNK = 4096


@dataclass(frozen=True)
class LpResult:
    """Optimal vertex of a small LP.

    :param x: Optimal point; ties broken by the lexicographically smallest x.
    :param value: Objective value at `x`.
    :param unique: True if no other feasible vertex attains the optimum
      within 1e-7.
    """

    x: np.ndarray
    value: float
    unique: bool


def _chunks(n_facets: int, k: int) -> Iterator[np.ndarray]:
    combos = itertools.combinations(range(n_facets), k)
    while True:
        batch = list(itertools.islice(combos, CHUNK))
        if not batch:
            return
        yield np.array(batch, dtype=int).reshape(len(batch), k)


def _vertices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All feasible basic solutions of {x : a x <= b}."""
    n = a.shape[1]
    found: List[np.ndarray] = []
    for combo in _chunks(a.shape[0], n):
        sub_a = a[combo]
        sub_b = b[combo]
        ok = np.abs(np.linalg.det(sub_a)) > DET_TOL
        if not ok.any():
            continue
        x = np.linalg.solve(sub_a[ok], sub_b[ok][..., None])[..., 0]
        feasible = np.all(x @ a.T <= b + FEASIBILITY_TOL, axis=1)
        if feasible.any():
            found.append(x[feasible])
    if not found:
        return np.zeros((0, n))
    return np.concatenate(found)


def _improving_ray(a: np.ndarray, c: np.ndarray) -> bool:
    """True if an extreme ray r of {r : a r <= 0} has c.r > 0."""
    n = a.shape[1]
    if n == 1:
        candidates = np.array([[1.0], [-1.0]])
    else:
        rays: List[np.ndarray] = []
        for combo in _chunks(a.shape[0], n - 1):
            # The null space of n-1 independent tight facets is a line.
            _, s, vt = np.linalg.svd(a[combo])
            independent = s[:, -1] > DET_TOL
            rays.append(vt[independent, -1, :])
            rays.append(-vt[independent, -1, :])
        candidates = np.concatenate(rays) if rays else np.zeros((0, n))
    recession = np.all(candidates @ a.T <= FEASIBILITY_TOL, axis=1)
    return bool(np.any(candidates[recession] @ c > FEASIBILITY_TOL))


def solve_small_lp(
    objective: Sequence[float],
    constraints: Sequence[Constraint],
    nonneg: Optional[Sequence[bool]] = None,
    sense: str = "max",
) -> LpResult:
    """Optimize `objective . x` subject to `a . x <= bound` for every
    `(a, bound)` in `constraints`.

    :param nonneg: Per-variable flag adding the facet x_k >= 0. Defaults to
      all variables nonnegative.
    :param sense: "max" or "min".
    :raises InfeasibleException: if no vertex is feasible and the origin is
      infeasible.
    :raises UnboundedException: if the objective improves along a feasible
      ray.
    """
    c = np.asarray(objective, dtype=float)
    n = c.size
    if sense not in ("max", "min"):
        raise RejectedInputException(f"sense must be 'max' or 'min', got {sense!r}.")
    if not 1 <= n <= MAX_VARIABLES:
        raise RejectedInputException(
            f"Vertex enumeration supports 1..{MAX_VARIABLES} variables, got {n}."
        )
    if len(constraints) > MAX_CONSTRAINTS:
        raise RejectedInputException(
            f"Vertex enumeration supports at most {MAX_CONSTRAINTS} constraints, "
            f"got {len(constraints)}."
        )
    if nonneg is None:
        nonneg = [True] * n
    if len(nonneg) != n:
        raise RejectedInputException("nonneg needs one flag per variable.")

    rows = [np.asarray(coeffs, dtype=float) for coeffs, _ in constraints]
    if any(r.shape != (n,) for r in rows):
        raise RejectedInputException(f"Every constraint needs {n} coefficients.")
    bounds = [float(bound) for _, bound in constraints]
    for k, flag in enumerate(nonneg):
        if flag:
            row = np.zeros(n)
            row[k] = -1.0
            rows.append(row)
            bounds.append(0.0)

    a = np.array(rows).reshape(-1, n)
    b = np.array(bounds)
    norms = np.linalg.norm(a, axis=1)
    trivial = norms == 0.0
    if np.any(b[trivial] < -FEASIBILITY_TOL):
        raise InfeasibleException("A constraint 0 <= bound has a negative bound.")
    a, b = a[~trivial] / norms[~trivial, None], b[~trivial] / norms[~trivial]

    signed = c if sense == "max" else -c
    vertices = _vertices(a, b) if a.shape[0] >= n else np.zeros((0, n))
    if vertices.shape[0] == 0:
        if a.shape[0] > 0 and np.any(b < -FEASIBILITY_TOL):
            raise InfeasibleException("The LP has no feasible point.")
        raise UnboundedException("The feasible set contains a line.")
    if _improving_ray(a, signed):
        raise UnboundedException("The objective is unbounded on the feasible set.")

    values = vertices @ signed
    best = float(values.max())
    scale = max(1.0, abs(best))
    near = vertices[values >= best - UNIQUENESS_TOL * scale]
    order = np.lexsort(near.T[::-1])
    x = near[order[0]]
    distinct = np.max(np.abs(near - x), axis=1) > UNIQUENESS_TOL
    unique = not bool(np.any(distinct))

    return LpResult(x=x, value=float(x @ c), unique=unique)


def warn_if_not_unique(result: LpResult, what: str) -> LpResult:
    if not result.unique:
        warnings.warn(f"{what} has more than one optimal vertex.", RuntimeWarning)
    return result


__all__ += ["warn_if_not_unique"]
