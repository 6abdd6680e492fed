"""Small dense real-matrix kernel.

All matrices in this package are tiny (at most a few dozen rows) and well
conditioned, so the kernel favours clarity: :class:`Matrix` wraps a
read-only float64 numpy array and every operation returns a new matrix.

Text format used for CLI I/O::

    2 2
    1.0 0.0
    0.3 0.7
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Union

import numpy as np

from erasurecast.utils.checks import RejectedInputException, SingularMatrixException

__all__ = [
    "Matrix",
    "multiply",
    "power",
    "hadamard",
    "inverse",
    "geometric_tail",
    "identity",
    "zeros",
    "transpose",
    "add",
    "subtract",
    "block",
    "max_abs",
    "row_sums",
    "read_matrices",
    "parse_matrices",
    "write_matrix",
]

# Pivot magnitude below which a matrix is reported singular.
SINGULAR_TOL = 1e-12

MatrixLike = Union["Matrix", np.ndarray, Sequence[Sequence[float]]]


@dataclass(frozen=True, eq=False)
class Matrix:
    """Immutable dense real matrix in row-major order.

    :param entries: Anything `numpy.asarray` turns into a 2-D float array.
    """

    entries: np.ndarray

    def __init__(self, entries: MatrixLike) -> None:
        if isinstance(entries, Matrix):
            arr = entries.entries
        else:
            arr = np.array(entries, dtype=float)
        if arr.ndim == 1 and arr.size > 0:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise RejectedInputException(
                f"Matrix needs positive rows and cols, got shape {arr.shape}."
            )
        if not np.all(np.isfinite(arr)):
            raise RejectedInputException("Matrix entries must be finite.")
        arr = np.array(arr, dtype=float, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, key):  # type: ignore[no-untyped-def]
        return self.entries[key]

    def __array__(self, dtype=None):  # type: ignore[no-untyped-def]
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.all(self.entries == other.entries))

    def __hash__(self) -> int:
        return hash((self.shape, self.entries.tobytes()))

    def __repr__(self) -> str:
        return f"Matrix({self.entries.tolist()!r})"

    def __matmul__(self, other: "Matrix") -> "Matrix":
        return multiply(self, other)

    def allclose(self, other: MatrixLike, atol: float = 1e-12, rtol: float = 0.0) -> bool:
        other_arr = np.asarray(Matrix(other).entries)
        return self.shape == other_arr.shape and bool(
            np.allclose(self.entries, other_arr, atol=atol, rtol=rtol)
        )

    def to_list(self) -> List[List[float]]:
        return self.entries.tolist()

    ###########################################################################
    # Text format.
    ###########################################################################

    @classmethod
    def from_text(cls, text: str) -> "Matrix":
        lines = [line.split() for line in text.strip().splitlines() if line.strip()]
        if not lines or len(lines[0]) != 2:
            raise RejectedInputException('Matrix text must start with "rows cols".')
        try:
            rows, cols = int(lines[0][0]), int(lines[0][1])
            values = [[float(v) for v in line] for line in lines[1:]]
        except ValueError as e:
            raise RejectedInputException(f"Malformed matrix text: {e}") from e
        if len(values) != rows or any(len(r) != cols for r in values):
            raise RejectedInputException(
                f"Matrix text declares {rows}x{cols} but the body does not match."
            )
        return cls(values)

    def to_text(self) -> str:
        body = "\n".join(" ".join(repr(float(v)) for v in row) for row in self.entries)
        return f"{self.rows} {self.cols}\n{body}\n"


def _as_matrix(a: MatrixLike) -> Matrix:
    return a if isinstance(a, Matrix) else Matrix(a)


def _check_square(a: Matrix, name: str = "matrix") -> None:
    if not a.is_square:
        raise RejectedInputException(f"{name} must be square, got {a.rows}x{a.cols}.")


###############################################################################
# Core operations.
###############################################################################


def multiply(a: MatrixLike, b: MatrixLike) -> Matrix:
    a, b = _as_matrix(a), _as_matrix(b)
    if a.cols != b.rows:
        raise RejectedInputException(
            f"Cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}."
        )
    return Matrix(a.entries @ b.entries)


def power(a: MatrixLike, n: int) -> Matrix:
    """A to the n-th power by repeated squaring; A^0 is the identity."""
    a = _as_matrix(a)
    _check_square(a)
    if int(n) != n or n < 0:
        raise RejectedInputException(f"Exponent must be a nonnegative integer, got {n}.")
    return Matrix(np.linalg.matrix_power(a.entries, int(n)))


def hadamard(a: MatrixLike, b: MatrixLike) -> Matrix:
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise RejectedInputException(
            f"Hadamard product needs equal shapes, got {a.shape} and {b.shape}."
        )
    return Matrix(a.entries * b.entries)


def inverse(a: MatrixLike) -> Matrix:
    """Gauss-Jordan inversion with partial pivoting.

    :raises SingularMatrixException: if a pivot magnitude drops below
      `SINGULAR_TOL` after row exchange.
    """
    a = _as_matrix(a)
    _check_square(a)
    n = a.rows
    work = np.hstack([np.array(a.entries, dtype=float), np.eye(n)])

    for k in range(n):
        p = int(np.argmax(np.abs(work[k:, k]))) + k
        if abs(work[p, k]) < SINGULAR_TOL:
            raise SingularMatrixException(f"Matrix is singular (pivot {k + 1}).")
        if p != k:
            work[[k, p]] = work[[p, k]]
        work[k] /= work[k, k]
        factors = work[:, k].copy()
        factors[k] = 0.0
        work -= np.outer(factors, work[k])

    return Matrix(work[:, n:])


def geometric_tail(n: int, a: MatrixLike, q: MatrixLike) -> Matrix:
    """Sum over i = 0..n-2 of Q^i A Q^(n-i-1)."""
    a, q = _as_matrix(a), _as_matrix(q)
    _check_square(a, "a")
    _check_square(q, "q")
    if a.shape != q.shape:
        raise RejectedInputException(
            f"a and q must have equal size, got {a.shape} and {q.shape}."
        )
    if int(n) != n or n < 2:
        raise RejectedInputException(f"n must be an integer >= 2, got {n}.")
    n = int(n)

    qe, ae = q.entries, a.entries
    # powers[m] = Q^m for m = 0..n-1; Q may be singular, so no division.
    powers = [np.eye(q.rows)]
    for _ in range(n - 1):
        powers.append(powers[-1] @ qe)
    total = np.zeros_like(ae)
    for i in range(n - 1):
        total += powers[i] @ ae @ powers[n - i - 1]
    return Matrix(total)


###############################################################################
# Helpers.
###############################################################################


def identity(n: int) -> Matrix:
    return Matrix(np.eye(n))


def zeros(rows: int, cols: int) -> Matrix:
    return Matrix(np.zeros((rows, cols)))


def transpose(a: MatrixLike) -> Matrix:
    return Matrix(_as_matrix(a).entries.T)


def add(a: MatrixLike, b: MatrixLike) -> Matrix:
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise RejectedInputException(f"Cannot add {a.shape} and {b.shape}.")
    return Matrix(a.entries + b.entries)


def subtract(a: MatrixLike, b: MatrixLike) -> Matrix:
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise RejectedInputException(f"Cannot subtract {b.shape} from {a.shape}.")
    return Matrix(a.entries - b.entries)


def block(rows_of_blocks: Sequence[Sequence[np.ndarray]]) -> Matrix:
    """Assemble a matrix from a grid of blocks. Blocks may have zero rows or
    columns as long as the final matrix does not."""
    return Matrix(np.block([[np.asarray(b, dtype=float) for b in row] for row in rows_of_blocks]))


def max_abs(a: MatrixLike) -> float:
    return float(np.max(np.abs(_as_matrix(a).entries)))


def row_sums(a: MatrixLike) -> np.ndarray:
    return _as_matrix(a).entries.sum(axis=1)


###############################################################################
# Files.
###############################################################################


def read_matrices(path: str) -> List[Matrix]:
    """Read one or more matrices separated by blank lines."""
    with open(path) as f:
        text = f.read()
    return parse_matrices(text)


def parse_matrices(text: str) -> List[Matrix]:
    chunks: List[List[str]] = [[]]
    for line in text.splitlines():
        if line.strip().startswith("#"):
            continue
        if line.strip() == "":
            if chunks[-1]:
                chunks.append([])
        else:
            chunks[-1].append(line)
    return [Matrix.from_text("\n".join(chunk)) for chunk in chunks if chunk]


def write_matrix(path: str, matrices: Iterable[Matrix]) -> None:
    with open(path, "w") as f:
        f.write("\n".join(m.to_text() for m in matrices))
