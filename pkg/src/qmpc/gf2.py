"""Bit-packed linear algebra over GF(2).

Vectors and matrix rows are packed into Python ints (bit ``j`` is component
``j``), which keeps arithmetic exact, rows hashable for enumeration oracles,
and single row operations one XOR wide.  All public operations validate
dimensions and raise :class:`~qmpc.errors.InvalidDimensionError` or
:class:`~qmpc.errors.SingularMatrixError` rather than returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, SingularMatrixError

__all__ = [
    "BitVec",
    "BitMatrix",
    "GLElement",
    "LinearSystem",
    "random_invertible",
    "apply_to_basis",
    "invert",
]


def _parity(x: int) -> int:
    return x.bit_count() & 1


@dataclass(frozen=True)
class BitVec:
    """A length-``m`` vector over GF(2), packed into an int.

    Attributes:
        bits: Packed components; bit ``j`` is component ``j``.
        m: Number of components.
    """

    bits: int
    m: int

    def __post_init__(self) -> None:
        if self.m < 0:
            raise InvalidDimensionError(f"vector length must be >= 0, got {self.m}")
        if self.bits < 0 or self.bits >> self.m:
            raise InvalidDimensionError(
                f"bits 0x{self.bits:x} do not fit in {self.m} components"
            )

    @classmethod
    def from_list(cls, comps: list[int] | tuple[int, ...]) -> "BitVec":
        bits = 0
        for j, c in enumerate(comps):
            if c & 1:
                bits |= 1 << j
        return cls(bits, len(comps))

    def to_list(self) -> list[int]:
        return [(self.bits >> j) & 1 for j in range(self.m)]

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(j)
        return (self.bits >> j) & 1

    def __xor__(self, other: "BitVec") -> "BitVec":
        if self.m != other.m:
            raise InvalidDimensionError(f"length mismatch: {self.m} vs {other.m}")
        return BitVec(self.bits ^ other.bits, self.m)

    def dot(self, other: "BitVec") -> int:
        """Inner product over GF(2)."""
        if self.m != other.m:
            raise InvalidDimensionError(f"length mismatch: {self.m} vs {other.m}")
        return _parity(self.bits & other.bits)

    def weight(self) -> int:
        return self.bits.bit_count()

    def is_zero(self) -> bool:
        return self.bits == 0

    def __str__(self) -> str:
        return "".join(str((self.bits >> j) & 1) for j in range(self.m))


@dataclass(frozen=True)
class BitMatrix:
    """An ``nrows x ncols`` matrix over GF(2), stored as packed rows.

    Attributes:
        rows: Tuple of packed row ints; bit ``j`` of ``rows[i]`` is entry (i, j).
        ncols: Number of columns.
    """

    rows: tuple[int, ...]
    ncols: int

    def __post_init__(self) -> None:
        if self.ncols < 0:
            raise InvalidDimensionError(f"ncols must be >= 0, got {self.ncols}")
        for r in self.rows:
            if r < 0 or r >> self.ncols:
                raise InvalidDimensionError(
                    f"row 0x{r:x} does not fit in {self.ncols} columns"
                )

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @classmethod
    def from_lists(cls, entries: list[list[int]]) -> "BitMatrix":
        ncols = len(entries[0]) if entries else 0
        rows = []
        for row in entries:
            if len(row) != ncols:
                raise InvalidDimensionError("ragged rows")
            bits = 0
            for j, c in enumerate(row):
                if c & 1:
                    bits |= 1 << j
            rows.append(bits)
        return cls(tuple(rows), ncols)

    @classmethod
    def identity(cls, m: int) -> "BitMatrix":
        return cls(tuple(1 << j for j in range(m)), m)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "BitMatrix":
        return cls((0,) * nrows, ncols)

    def entry(self, i: int, j: int) -> int:
        return (self.rows[i] >> j) & 1

    def to_lists(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.ncols)] for r in self.rows]

    def transpose(self) -> "BitMatrix":
        cols = []
        for j in range(self.ncols):
            bits = 0
            for i, r in enumerate(self.rows):
                if (r >> j) & 1:
                    bits |= 1 << i
            cols.append(bits)
        return BitMatrix(tuple(cols), self.nrows)

    def mat_vec(self, x: BitVec) -> BitVec:
        """Matrix-vector product ``self @ x``."""
        if x.m != self.ncols:
            raise InvalidDimensionError(
                f"vector length {x.m} != ncols {self.ncols}"
            )
        bits = 0
        for i, r in enumerate(self.rows):
            if _parity(r & x.bits):
                bits |= 1 << i
        return BitVec(bits, self.nrows)

    def mat_mul(self, other: "BitMatrix") -> "BitMatrix":
        """Matrix product ``self @ other``."""
        if self.ncols != other.nrows:
            raise InvalidDimensionError(
                f"inner dimensions differ: {self.ncols} vs {other.nrows}"
            )
        out = []
        for r in self.rows:
            acc = 0
            rr = r
            while rr:
                j = (rr & -rr).bit_length() - 1
                acc ^= other.rows[j]
                rr &= rr - 1
            out.append(acc)
        return BitMatrix(tuple(out), other.ncols)

    def rank(self) -> int:
        work = list(self.rows)
        rank = 0
        for col in range(self.ncols):
            pivot = next(
                (i for i in range(rank, len(work)) if (work[i] >> col) & 1), None
            )
            if pivot is None:
                continue
            work[rank], work[pivot] = work[pivot], work[rank]
            for i in range(len(work)):
                if i != rank and (work[i] >> col) & 1:
                    work[i] ^= work[rank]
            rank += 1
        return rank

    def __str__(self) -> str:
        return "\n".join(
            "".join(str((r >> j) & 1) for j in range(self.ncols)) for r in self.rows
        )


@dataclass(frozen=True)
class GLElement:
    """An invertible GF(2) matrix together with its cached inverse.

    Attributes:
        matrix: The invertible matrix.
        inverse_matrix: Its inverse (``matrix @ inverse_matrix = I``).
    """

    matrix: BitMatrix
    inverse_matrix: BitMatrix

    @classmethod
    def from_matrix(cls, matrix: BitMatrix) -> "GLElement":
        return cls(matrix, invert(matrix))

    @property
    def m(self) -> int:
        return self.matrix.ncols

    def inverse(self) -> "GLElement":
        return GLElement(self.inverse_matrix, self.matrix)


class LinearSystem:
    """An incrementally built GF(2) linear system ``A v = b`` over ``m`` variables.

    Rows are kept in reduced row echelon form so that consistency is known at
    insertion time and uniform solution sampling is back-substitution over the
    free variables.
    """

    def __init__(self, m: int) -> None:
        if m < 0:
            raise InvalidDimensionError(f"variable count must be >= 0, got {m}")
        self.m = m
        self._pivots: dict[int, tuple[int, int]] = {}  # pivot col -> (row, rhs)
        self.consistent = True

    def add(self, row: int | BitVec, rhs: int) -> bool:
        """Adds one equation; returns True if it was independent of prior rows."""
        bits = row.bits if isinstance(row, BitVec) else row
        rhs &= 1
        for col, (prow, prhs) in self._pivots.items():
            if (bits >> col) & 1:
                bits ^= prow
                rhs ^= prhs
        if bits == 0:
            if rhs:
                self.consistent = False
            return False
        col = (bits & -bits).bit_length() - 1
        # Back-reduce existing rows so the form stays fully reduced.
        for c, (prow, prhs) in list(self._pivots.items()):
            if (prow >> col) & 1:
                self._pivots[c] = (prow ^ bits, prhs ^ rhs)
        self._pivots[col] = (bits, rhs)
        return True

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def sample_solution(self, rng: np.random.Generator) -> BitVec:
        """Returns a uniformly random solution of the current system."""
        if not self.consistent:
            raise SingularMatrixError("system is inconsistent; no solutions")
        free_cols = [j for j in range(self.m) if j not in self._pivots]
        v = 0
        for j in free_cols:
            if rng.integers(0, 2):
                v |= 1 << j
        for col, (prow, prhs) in self._pivots.items():
            # prow has its pivot at `col` and zeros at other pivot columns.
            val = _parity(prow & v & ~(1 << col)) ^ prhs
            if val:
                v |= 1 << col
        return BitVec(v, self.m)

    def copy(self) -> "LinearSystem":
        dup = LinearSystem(self.m)
        dup._pivots = dict(self._pivots)
        dup.consistent = self.consistent
        return dup


def invert(mat: BitMatrix) -> BitMatrix:
    """Inverts a square GF(2) matrix by Gauss-Jordan elimination.

    Args:
        mat: Square matrix.

    Returns:
        The inverse matrix.

    Raises:
        InvalidDimensionError: If ``mat`` is not square.
        SingularMatrixError: If ``mat`` has no inverse.
    """
    m = mat.ncols
    if mat.nrows != m:
        raise InvalidDimensionError(f"matrix is {mat.nrows}x{m}, not square")
    work = list(mat.rows)
    aug = [1 << i for i in range(m)]
    row = 0
    for col in range(m):
        pivot = next((i for i in range(row, m) if (work[i] >> col) & 1), None)
        if pivot is None:
            raise SingularMatrixError(f"matrix of rank < {m} cannot be inverted")
        work[row], work[pivot] = work[pivot], work[row]
        aug[row], aug[pivot] = aug[pivot], aug[row]
        for i in range(m):
            if i != row and (work[i] >> col) & 1:
                work[i] ^= work[row]
                aug[i] ^= aug[row]
        row += 1
    return BitMatrix(tuple(aug), m)


def random_invertible(m: int, rng: int | np.random.Generator | None = None) -> GLElement:
    """Samples a uniformly random element of GL(m, F_2).

    Rows are drawn uniformly and rejected while linearly dependent on the rows
    already committed, which makes every invertible matrix equally likely (at
    step ``j`` each of the ``2^m - 2^j`` valid rows is hit with equal
    probability).

    Args:
        m: Dimension; must be positive.
        rng: Seed or numpy Generator.

    Returns:
        A GLElement with the inverse precomputed.

    Raises:
        InvalidDimensionError: If ``m`` is not positive.
    """
    if m <= 0:
        raise InvalidDimensionError(f"GL dimension must be positive, got {m}")
    rng = np.random.default_rng(rng)
    basis = LinearSystem(m)  # used only for independence bookkeeping
    rows: list[int] = []
    while len(rows) < m:
        candidate = int(rng.integers(0, 1 << m))
        probe = basis.copy()
        if probe.add(candidate, 0):
            basis = probe
            rows.append(candidate)
    return GLElement.from_matrix(BitMatrix(tuple(rows), m))


def apply_to_basis(g: GLElement, x: BitVec) -> BitVec:
    """Applies ``g`` to a vector: returns ``g.matrix @ x``.

    Args:
        g: Group element.
        x: Vector of matching length.

    Returns:
        The image vector; nonzero whenever ``x`` is nonzero.
    """
    return g.matrix.mat_vec(x)
