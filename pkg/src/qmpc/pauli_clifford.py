"""Pauli and Clifford group algebra in tableau form.

A Pauli operator on ``m`` qubits is ``i^phase * X^x * Z^z`` with ``x`` and
``z`` packed into ints (bit ``j`` = qubit ``j``).  A Clifford operator is
stored as the images of the generators ``X_0..X_{m-1}, Z_0..Z_{m-1}`` under
conjugation — a faithful representation modulo global phase (the tableau is
the canonical form used for equality).  Dense matrices are produced only
through explicit gate synthesis, so every dense result is cross-checkable
against the tableau algebra.

Conventions:
    - Computational basis index of ``|q_0 q_1 ... q_{m-1}>`` places qubit 0 in
      the most significant position; helpers :func:`index_of_bits` /
      :func:`bits_of_index` convert to the packed little-endian ints used by
      :mod:`qmpc.gf2`.
    - ``compose(a, b)`` is the unitary product ``a @ b`` (apply ``b`` first).
    - Dense matrices from :func:`to_dense` are normalized so the first
      nonzero entry of the first column is positive real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidOperatorError,
    ResourceLimitError,
)
from .gf2 import BitMatrix, LinearSystem

__all__ = [
    "PauliOp",
    "CliffordOp",
    "CliffordCircuit",
    "compose",
    "inverse",
    "conjugate_pauli",
    "random_clifford",
    "tensor",
    "embed_clifford",
    "to_dense",
    "pauli_twirl_check",
    "synthesize",
    "apply_unitary",
    "index_of_bits",
    "bits_of_index",
    "GATE_UNITARIES",
]

DENSE_LIMIT_DEFAULT = 12


def _parity(x: int) -> int:
    return x.bit_count() & 1


# ---------------------------------------------------------------------------
# Pauli operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliOp:
    """``i^phase * X^x * Z^z`` on ``m`` qubits.

    Attributes:
        m: Qubit count.
        x: Packed X-part (bit ``j`` = qubit ``j``).
        z: Packed Z-part.
        phase: Exponent of ``i``, mod 4.  Hermitian operators have
            ``phase % 2 == parity(x & z)``.
    """

    m: int
    x: int
    z: int
    phase: int = 0

    def __post_init__(self) -> None:
        if self.m < 0:
            raise InvalidDimensionError(f"qubit count must be >= 0, got {self.m}")
        for part in (self.x, self.z):
            if part < 0 or part >> self.m:
                raise InvalidDimensionError(
                    f"support 0x{part:x} does not fit on {self.m} qubits"
                )
        if not 0 <= self.phase < 4:
            object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def identity(cls, m: int) -> "PauliOp":
        return cls(m, 0, 0, 0)

    @classmethod
    def single(cls, m: int, qubit: int, kind: str) -> "PauliOp":
        """A single-qubit X, Y, or Z embedded on ``m`` qubits (Hermitian)."""
        if not 0 <= qubit < m:
            raise InvalidDimensionError(f"qubit {qubit} out of range for m={m}")
        if kind == "X":
            return cls(m, 1 << qubit, 0, 0)
        if kind == "Z":
            return cls(m, 0, 1 << qubit, 0)
        if kind == "Y":
            return cls(m, 1 << qubit, 1 << qubit, 1)
        raise InvalidOperatorError(f"unknown single-qubit Pauli kind {kind!r}")

    def mul(self, other: "PauliOp") -> "PauliOp":
        """Operator product ``self @ other``."""
        if self.m != other.m:
            raise InvalidDimensionError(f"size mismatch: {self.m} vs {other.m}")
        phase = (self.phase + other.phase + 2 * _parity(self.z & other.x)) % 4
        return PauliOp(self.m, self.x ^ other.x, self.z ^ other.z, phase)

    def adjoint(self) -> "PauliOp":
        phase = (-self.phase + 2 * _parity(self.x & self.z)) % 4
        return PauliOp(self.m, self.x, self.z, phase)

    def is_hermitian(self) -> bool:
        return (self.phase & 1) == _parity(self.x & self.z)

    def is_identity_class(self) -> bool:
        """True if the operator is a phase times the identity."""
        return self.x == 0 and self.z == 0

    def commutes_with(self, other: "PauliOp") -> bool:
        return self.symplectic_product(other) == 0

    def symplectic_product(self, other: "PauliOp") -> int:
        if self.m != other.m:
            raise InvalidDimensionError(f"size mismatch: {self.m} vs {other.m}")
        return _parity(self.x & other.z) ^ _parity(self.z & other.x)

    def class_vector(self) -> int:
        """Packed ``(x | z << m)`` class label in ``F_2^{2m}``."""
        return self.x | (self.z << self.m)

    def restrict(self, qubits: tuple[int, ...]) -> "PauliOp":
        """The factor acting on ``qubits`` (phase kept on the full operator)."""
        x = _gather(self.x, qubits)
        z = _gather(self.z, qubits)
        return PauliOp(len(qubits), x, z, 0)

    def tensor(self, other: "PauliOp") -> "PauliOp":
        return PauliOp(
            self.m + other.m,
            self.x | (other.x << self.m),
            self.z | (other.z << self.m),
            (self.phase + other.phase) % 4,
        )

    def embed(self, m_total: int, qubits: tuple[int, ...]) -> "PauliOp":
        """Places this operator on the listed qubits of a larger register."""
        if len(qubits) != self.m:
            raise InvalidDimensionError(
                f"need {self.m} target qubits, got {len(qubits)}"
            )
        return PauliOp(
            m_total, _scatter(self.x, qubits), _scatter(self.z, qubits), self.phase
        )

    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def to_dense(self, limit: int = DENSE_LIMIT_DEFAULT) -> np.ndarray:
        if self.m > limit:
            raise ResourceLimitError(
                f"dense Pauli on {self.m} qubits exceeds limit {limit}; "
                "raise the limit or stay in tableau form"
            )
        out = np.array([[1.0 + 0j]])
        for j in range(self.m):
            xb, zb = (self.x >> j) & 1, (self.z >> j) & 1
            mat = _SINGLE_XZ[(xb, zb)]
            out = np.kron(out, mat)
        return (1j**self.phase) * out

    def to_text(self) -> str:
        xs = "".join(str((self.x >> j) & 1) for j in range(self.m))
        zs = "".join(str((self.z >> j) & 1) for j in range(self.m))
        return f"X:{xs or '-'} Z:{zs or '-'} ph:{self.phase}"

    @classmethod
    def from_text(cls, text: str) -> "PauliOp":
        try:
            xf, zf, pf = text.split()
            xs = xf.removeprefix("X:")
            zs = zf.removeprefix("Z:")
            phase = int(pf.removeprefix("ph:"))
            if xs == "-":
                xs, zs = "", ""
            m = len(xs)
            if len(zs) != m:
                raise ValueError("X and Z strings differ in length")
            x = sum((1 << j) for j, c in enumerate(xs) if c == "1")
            z = sum((1 << j) for j, c in enumerate(zs) if c == "1")
        except ValueError as exc:
            raise InvalidOperatorError(f"cannot parse Pauli text {text!r}") from exc
        return cls(m, x, z, phase)


# |q0 q1 ...> with qubit 0 most significant, so kron builds left-to-right.
_SINGLE_XZ = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
    (1, 1): np.array([[0, -1], [1, 0]], dtype=complex),  # XZ
}


def _gather(bits: int, positions: tuple[int, ...]) -> int:
    out = 0
    for i, p in enumerate(positions):
        if (bits >> p) & 1:
            out |= 1 << i
    return out


def _scatter(bits: int, positions: tuple[int, ...]) -> int:
    out = 0
    for i, p in enumerate(positions):
        if (bits >> i) & 1:
            out |= 1 << p
    return out


def index_of_bits(bits: int, m: int) -> int:
    """Maps a packed little-endian qubit assignment to a basis index."""
    idx = 0
    for j in range(m):
        if (bits >> j) & 1:
            idx |= 1 << (m - 1 - j)
    return idx


def bits_of_index(idx: int, m: int) -> int:
    """Inverse of :func:`index_of_bits`."""
    bits = 0
    for j in range(m):
        if (idx >> (m - 1 - j)) & 1:
            bits |= 1 << j
    return bits


# ---------------------------------------------------------------------------
# Clifford operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CliffordOp:
    """A Clifford unitary modulo global phase, as generator images.

    ``rows[j]`` is the conjugation image of ``X_j`` for ``j < m`` and of
    ``Z_{j-m}`` for ``j >= m``; every row is a Hermitian Pauli.  Equality and
    hashing use the rows directly (the tableau is the canonical form).

    Attributes:
        m: Qubit count.
        rows: Tuple of ``2m`` Hermitian PauliOps.
    """

    m: int
    rows: tuple[PauliOp, ...]

    def __post_init__(self) -> None:
        if len(self.rows) != 2 * self.m:
            raise InvalidOperatorError(
                f"need {2 * self.m} generator images, got {len(self.rows)}"
            )

    def validate(self) -> "CliffordOp":
        """Checks the symplectic commutation relations and Hermitian phases.

        Returns self so calls can be chained; raises InvalidOperatorError on
        any violation.
        """
        m = self.m
        for j, row in enumerate(self.rows):
            if row.m != m:
                raise InvalidOperatorError(f"row {j} acts on {row.m} != {m} qubits")
            if not row.is_hermitian():
                raise InvalidOperatorError(f"row {j} is not Hermitian: {row.to_text()}")
        for j in range(2 * m):
            for l in range(j + 1, 2 * m):
                want = 1 if l == j + m else 0
                got = self.rows[j].symplectic_product(self.rows[l])
                if got != want:
                    raise InvalidOperatorError(
                        f"rows {j},{l} have symplectic product {got}, want {want}"
                    )
        return self

    @classmethod
    def identity(cls, m: int) -> "CliffordOp":
        rows = tuple(PauliOp.single(m, q, "X") for q in range(m)) + tuple(
            PauliOp.single(m, q, "Z") for q in range(m)
        )
        return cls(m, rows)

    def symplectic_matrix(self) -> BitMatrix:
        """The ``2m x 2m`` class action: column ``j`` is ``rows[j]``'s class."""
        mm = 2 * self.m
        rows_out = []
        for i in range(mm):
            bits = 0
            for j in range(mm):
                if (self.rows[j].class_vector() >> i) & 1:
                    bits |= 1 << j
            rows_out.append(bits)
        return BitMatrix(tuple(rows_out), mm)

    def sign_bits(self) -> int:
        """Packed sign bits (bit ``j`` set when row ``j`` carries a minus)."""
        bits = 0
        for j, row in enumerate(self.rows):
            if row.phase >> 1:
                bits |= 1 << j
        return bits

    def tensor(self, other: "CliffordOp") -> "CliffordOp":
        m = self.m + other.m
        mine = tuple(range(self.m))
        theirs = tuple(range(self.m, m))
        rows = (
            [r.embed(m, mine) for r in self.rows[: self.m]]
            + [r.embed(m, theirs) for r in other.rows[: other.m]]
            + [r.embed(m, mine) for r in self.rows[self.m :]]
            + [r.embed(m, theirs) for r in other.rows[other.m :]]
        )
        return CliffordOp(m, tuple(rows))

    def to_text(self) -> str:
        mm = 2 * self.m
        smat = self.symplectic_matrix()
        width = (mm + 3) // 4
        rows_hex = ".".join(f"{r:0{width}x}" for r in smat.rows)
        return f"m={self.m} S:{rows_hex} P:{self.sign_bits():0{width}x}"

    @classmethod
    def from_text(cls, text: str) -> "CliffordOp":
        try:
            mf, sf, pf = text.split()
            m = int(mf.removeprefix("m="))
            row_ints = [int(h, 16) for h in sf.removeprefix("S:").split(".")]
            signs = int(pf.removeprefix("P:"), 16)
        except ValueError as exc:
            raise InvalidOperatorError(f"cannot parse Clifford text {text!r}") from exc
        smat = BitMatrix(tuple(row_ints), 2 * m)
        rows = []
        for j in range(2 * m):
            cls_vec = 0
            for i in range(2 * m):
                if (smat.rows[i] >> j) & 1:
                    cls_vec |= 1 << i
            x = cls_vec & ((1 << m) - 1)
            z = cls_vec >> m
            phase = (_parity(x & z) + 2 * ((signs >> j) & 1)) % 4
            rows.append(PauliOp(m, x, z, phase))
        return cls(m, tuple(rows)).validate()


def conjugate_pauli(c: CliffordOp, p: PauliOp) -> PauliOp:
    """Returns ``c @ p @ c.adjoint()`` with exact phase.

    Args:
        c: Clifford operator.
        p: Pauli operator on the same qubit count.

    Returns:
        The conjugated Pauli; Hermitian inputs give Hermitian outputs.
    """
    if c.m != p.m:
        raise InvalidDimensionError(f"size mismatch: clifford {c.m}, pauli {p.m}")
    acc = PauliOp(c.m, 0, 0, p.phase)
    rest = p.x
    while rest:
        j = (rest & -rest).bit_length() - 1
        acc = acc.mul(c.rows[j])
        rest &= rest - 1
    rest = p.z
    while rest:
        j = (rest & -rest).bit_length() - 1
        acc = acc.mul(c.rows[c.m + j])
        rest &= rest - 1
    return acc


def _conjugation_table(c: CliffordOp) -> tuple:
    """Image of every (x, z) class under conjugation by ``c`` (small ops).

    Memoized on the operator itself: the table is a pure function of the
    frozen tableau, so caching it as a hidden attribute never changes
    observable behavior; it just makes repeated row updates O(1).
    """
    tbl = c.__dict__.get("_conj_tbl")
    if tbl is None:
        m = c.m
        tbl = tuple(
            (img.x, img.z, img.phase)
            for code in range(1 << (2 * m))
            for img in (conjugate_pauli(c, PauliOp(m, code & ((1 << m) - 1),
                                                   code >> m, 0)),)
        )
        object.__setattr__(c, "_conj_tbl", tbl)
    return tbl


def conjugation_masks(c: CliffordOp, positions: tuple[int, ...]) -> tuple:
    """Pre-scattered conjugation table for updating rows of a wide register.

    Returns ``(off_mask, table)`` where ``table[xg | zg << m]`` holds
    ``(x_new, z_new, dphase)`` with the new bits already scattered onto
    ``positions``.  Row update: clear the position bits with ``off_mask``,
    OR in the table bits, add ``dphase`` mod 4.  Memoized per operator and
    position tuple (both frozen), small operators only (``c.m <= 3``).
    """
    memo = c.__dict__.get("_scat_tbls")
    if memo is None:
        memo = {}
        object.__setattr__(c, "_scat_tbls", memo)
    got = memo.get(positions)
    if got is None:
        if len(positions) != c.m:
            raise InvalidDimensionError(
                f"need {c.m} positions, got {len(positions)}"
            )
        base = _conjugation_table(c)
        table = tuple(
            (_scatter(nx, positions), _scatter(nz, positions), dph)
            for nx, nz, dph in base
        )
        got = (~_scatter((1 << c.m) - 1, positions), table)
        memo[positions] = got
    return got


def conjugate_pauli_on(
    c: CliffordOp, qubits: tuple[int, ...], p: PauliOp
) -> PauliOp:
    """Conjugates ``p`` by ``c`` acting on the listed qubits of ``p``'s register.

    Equivalent to ``conjugate_pauli(embed_clifford(c, qubits, p.m), p)`` but
    without building the embedded operator.  The factor of ``p`` outside
    ``qubits`` commutes with the update (disjoint support), so phases add.
    """
    if len(qubits) != c.m:
        raise InvalidDimensionError(f"need {c.m} qubits, got {len(qubits)}")
    if c.m <= 3:
        off_mask, table = conjugation_masks(c, qubits)
        xg = _gather(p.x, qubits)
        zg = _gather(p.z, qubits)
        nx, nz, dph = table[xg | (zg << c.m)]
        return PauliOp(
            p.m,
            (p.x & off_mask) | nx,
            (p.z & off_mask) | nz,
            (p.phase + dph) & 3,
        )
    small = p.restrict(qubits)
    conj = conjugate_pauli(c, small)
    off_mask = ~_scatter((1 << len(qubits)) - 1, qubits)
    x = (p.x & off_mask) | _scatter(conj.x, qubits)
    z = (p.z & off_mask) | _scatter(conj.z, qubits)
    return PauliOp(p.m, x, z, (p.phase + conj.phase) % 4)


def compose(a: CliffordOp, b: CliffordOp) -> CliffordOp:
    """Unitary product ``a @ b`` (apply ``b`` first)."""
    if a.m != b.m:
        raise InvalidDimensionError(f"size mismatch: {a.m} vs {b.m}")
    return CliffordOp(a.m, tuple(conjugate_pauli(a, row) for row in b.rows))


def inverse(c: CliffordOp) -> CliffordOp:
    """The inverse Clifford (tableau transpose through the symplectic form)."""
    m = c.m
    mm = 2 * m
    smat = c.symplectic_matrix()
    # S^{-1} = Omega S^T Omega with Omega = [[0, I], [I, 0]].
    st = smat.transpose()
    inv_rows = tuple(
        st.rows[(i + m) % mm] for i in range(mm)
    )  # Omega on the left: swap row halves
    inv_cols_swapped = []
    for r in inv_rows:  # Omega on the right: swap column halves
        lo = r & ((1 << m) - 1)
        hi = r >> m
        inv_cols_swapped.append(lo << m | hi)
    s_inv = BitMatrix(tuple(inv_cols_swapped), mm)
    rows = []
    for j in range(mm):
        cls_vec = 0
        for i in range(mm):
            if (s_inv.rows[i] >> j) & 1:
                cls_vec |= 1 << i
        x = cls_vec & ((1 << m) - 1)
        z = cls_vec >> m
        candidate = PauliOp(m, x, z, _parity(x & z))
        # Fix the sign so that c (c^dag g_j c) c^dag == g_j exactly.
        generator = (
            PauliOp.single(m, j, "X") if j < m else PauliOp.single(m, j - m, "Z")
        )
        roundtrip = conjugate_pauli(c, candidate)
        delta = (generator.phase - roundtrip.phase) % 4
        rows.append(PauliOp(m, x, z, (candidate.phase + delta) % 4))
    return CliffordOp(m, tuple(rows))


def tensor(a: CliffordOp, b: CliffordOp) -> CliffordOp:
    return a.tensor(b)


def embed_clifford(c: CliffordOp, qubits: tuple[int, ...], m_total: int) -> CliffordOp:
    """Extends ``c`` on the listed qubits by the identity elsewhere."""
    if len(qubits) != c.m:
        raise InvalidDimensionError(f"need {c.m} qubits, got {len(qubits)}")
    rows = list(CliffordOp.identity(m_total).rows)
    for i, q in enumerate(qubits):
        rows[q] = c.rows[i].embed(m_total, qubits)
        rows[m_total + q] = c.rows[c.m + i].embed(m_total, qubits)
    return CliffordOp(m_total, tuple(rows))


# ---------------------------------------------------------------------------
# Generator gates and circuits
# ---------------------------------------------------------------------------


def _gate_clifford_1q(images: tuple[PauliOp, PauliOp]) -> CliffordOp:
    return CliffordOp(1, images)


_H1 = _gate_clifford_1q((PauliOp(1, 0, 1, 0), PauliOp(1, 1, 0, 0)))
_S1 = _gate_clifford_1q((PauliOp(1, 1, 1, 1), PauliOp(1, 0, 1, 0)))
_X1 = _gate_clifford_1q((PauliOp(1, 1, 0, 0), PauliOp(1, 0, 1, 2)))
_Y1 = _gate_clifford_1q((PauliOp(1, 1, 0, 2), PauliOp(1, 0, 1, 2)))
_Z1 = _gate_clifford_1q((PauliOp(1, 1, 0, 2), PauliOp(1, 0, 1, 0)))
_SDG1 = _gate_clifford_1q((PauliOp(1, 1, 1, 3), PauliOp(1, 0, 1, 0)))
_CNOT2 = CliffordOp(
    2,
    (
        PauliOp(2, 0b11, 0, 0),  # X_0 -> X_0 X_1
        PauliOp(2, 0b10, 0, 0),  # X_1 -> X_1
        PauliOp(2, 0, 0b01, 0),  # Z_0 -> Z_0
        PauliOp(2, 0, 0b11, 0),  # Z_1 -> Z_0 Z_1
    ),
)
_CZ2 = CliffordOp(
    2,
    (
        PauliOp(2, 0b01, 0b10, 0),  # X_0 -> X_0 Z_1
        PauliOp(2, 0b10, 0b01, 0),  # X_1 -> Z_0 X_1
        PauliOp(2, 0, 0b01, 0),
        PauliOp(2, 0, 0b10, 0),
    ),
)

_GATE_TABLE_1Q = {"H": _H1, "S": _S1, "SDG": _SDG1, "X": _X1, "Y": _Y1, "Z": _Z1}
_GATE_TABLE_2Q = {"CNOT": _CNOT2, "CZ": _CZ2}

_SQ2 = 1 / math.sqrt(2)
GATE_UNITARIES: dict[str, np.ndarray] = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex),
    "TDG": np.diag([1, np.exp(-1j * np.pi / 4)]).astype(complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}


@dataclass(frozen=True)
class CliffordCircuit:
    """An ordered list of generator gates; ``gates[0]`` is applied first.

    Each gate is ``("H", q)``, ``("S", q)``, or ``("CNOT", q_control,
    q_target)``.
    """

    gates: tuple[tuple, ...]

    def to_clifford(self, m: int) -> CliffordOp:
        acc = CliffordOp.identity(m)
        for gate in self.gates:
            acc = _left_multiply_gate(acc, gate)
        return acc

    def inverse(self) -> "CliffordCircuit":
        out: list[tuple] = []
        for gate in reversed(self.gates):
            if gate[0] == "S":
                out.extend([gate, gate, gate])  # S^dag = S^3
            else:
                out.append(gate)  # H and CNOT are involutions
        return CliffordCircuit(tuple(out))

    def __len__(self) -> int:
        return len(self.gates)


@lru_cache(maxsize=8192)
def gate_clifford(name: str, qubits: tuple[int, ...], m: int) -> CliffordOp:
    """The named generator gate embedded on ``m`` qubits (cached: the
    result is a frozen value shared across call sites)."""
    if name in _GATE_TABLE_1Q:
        return embed_clifford(_GATE_TABLE_1Q[name], qubits, m)
    if name in _GATE_TABLE_2Q:
        return embed_clifford(_GATE_TABLE_2Q[name], qubits, m)
    raise InvalidOperatorError(f"unknown Clifford gate {name!r}")


def _left_multiply_gate(c: CliffordOp, gate: tuple) -> CliffordOp:
    """Returns ``g @ c`` for a generator gate ``g`` without building ``g``."""
    name, qubits = gate[0], tuple(gate[1:])
    small = _GATE_TABLE_1Q.get(name) or _GATE_TABLE_2Q.get(name)
    if small is None:
        raise InvalidOperatorError(f"unknown Clifford gate {name!r}")
    rows = tuple(conjugate_pauli_on(small, qubits, row) for row in c.rows)
    return CliffordOp(c.m, rows)


def clifford_from_gates(gates: list[tuple] | tuple[tuple, ...], m: int) -> CliffordOp:
    return CliffordCircuit(tuple(gates)).to_clifford(m)


# ---------------------------------------------------------------------------
# Synthesis: tableau -> generator circuit
# ---------------------------------------------------------------------------


def synthesize(c: CliffordOp) -> CliffordCircuit:
    """Decomposes a Clifford into H/S/CNOT generators (exact, incl. signs).

    The sweep left-multiplies gates that reduce the tableau to the identity,
    then returns the reversed inverted gate list.  Gate count is O(m^2).
    """
    m = c.m
    work = list(c.rows)
    emitted: list[tuple] = []

    def emit(*gates: tuple) -> None:
        nonlocal work
        for gate in gates:
            name, qubits = gate[0], tuple(gate[1:])
            small = _GATE_TABLE_1Q.get(name) or _GATE_TABLE_2Q[name]
            work = [conjugate_pauli_on(small, qubits, row) for row in work]
            emitted.append(gate)

    def emit_x(q: int) -> None:
        emit(("H", q), ("S", q), ("S", q), ("H", q))

    def emit_z(q: int) -> None:
        emit(("S", q), ("S", q))

    def emit_cz(a: int, b: int) -> None:
        emit(("H", b), ("CNOT", a, b), ("H", b))

    def emit_swap(a: int, b: int) -> None:
        emit(("CNOT", a, b), ("CNOT", b, a), ("CNOT", a, b))

    for q in range(m):
        # --- bring the Z_q image to +/- Z_q ---
        zr = work[m + q]
        if zr.x:
            pivot = (zr.x & -zr.x).bit_length() - 1
            rest = zr.x & ~(1 << pivot)
            while rest:
                r = (rest & -rest).bit_length() - 1
                emit(("CNOT", pivot, r))
                rest &= rest - 1
            if pivot != q:
                emit_swap(pivot, q)
            zr = work[m + q]
            if (zr.z >> q) & 1:
                emit(("S", q))
            zr = work[m + q]
            rest = zr.z
            while rest:
                r = (rest & -rest).bit_length() - 1
                emit_cz(q, r)
                rest &= rest - 1
            emit(("H", q))
        else:
            if not (zr.z >> q) & 1:
                pivot = (zr.z & -zr.z).bit_length() - 1
                emit(("CNOT", q, pivot))
            zr = work[m + q]
            rest = zr.z & ~(1 << q)
            while rest:
                r = (rest & -rest).bit_length() - 1
                emit(("CNOT", r, q))
                rest &= rest - 1
        if work[m + q].phase == 2:
            emit_x(q)
        # --- bring the X_q image to +/- X_q, preserving Z_q ---
        xr = work[q]
        rest = xr.x & ~(1 << q)
        while rest:
            r = (rest & -rest).bit_length() - 1
            emit(("CNOT", q, r))
            rest &= rest - 1
        if (work[q].z >> q) & 1:
            emit(("S", q))
        rest = work[q].z
        while rest:
            r = (rest & -rest).bit_length() - 1
            emit_cz(q, r)
            rest &= rest - 1
        if work[q].phase == 2:
            emit_z(q)

    # emitted (applied left-most last) reduce c to the identity, so
    # c = g_1^dag g_2^dag ... g_N^dag with g_N^dag applied first.
    out: list[tuple] = []
    for gate in reversed(emitted):
        if gate[0] == "S":
            out.extend([gate, gate, gate])
        else:
            out.append(gate)
    return CliffordCircuit(tuple(out))


# ---------------------------------------------------------------------------
# Dense linear algebra
# ---------------------------------------------------------------------------


def apply_unitary(
    psi: np.ndarray, u: np.ndarray, qubits: tuple[int, ...], m: int
) -> np.ndarray:
    """Applies a ``2^k x 2^k`` unitary to the listed qubits of a state/batch.

    Args:
        psi: Array of shape ``(2^m,)`` or ``(2^m, batch)``.
        u: Unitary on ``k = len(qubits)`` qubits.
        qubits: Target qubits (axis order matches ``u``'s tensor factors).
        m: Total qubit count.

    Returns:
        The transformed array, same shape as ``psi``.
    """
    k = len(qubits)
    batch = psi.shape[1:] if psi.ndim > 1 else ()
    tens = psi.reshape((2,) * m + batch)
    ut = u.reshape((2,) * (2 * k))
    moved = np.tensordot(ut, tens, axes=(list(range(k, 2 * k)), list(qubits)))
    # tensordot puts the new qubit axes first; move them home.
    moved = np.moveaxis(moved, range(k), qubits)
    return moved.reshape(psi.shape)


def circuit_unitary(circuit: CliffordCircuit | list[tuple], m: int) -> np.ndarray:
    """Dense unitary of a gate list (no normalization applied)."""
    gates = circuit.gates if isinstance(circuit, CliffordCircuit) else circuit
    mat = np.eye(1 << m, dtype=complex)
    for gate in gates:
        name, qubits = gate[0], tuple(gate[1:])
        mat = apply_unitary(mat, GATE_UNITARIES[name], qubits, m)
    return mat


def _normalize_global_phase(mat: np.ndarray) -> np.ndarray:
    flat = mat.T.reshape(-1)  # column-major scan: first column first
    idx = np.argmax(np.abs(flat) > 1e-12)
    ref = flat[idx]
    return mat * (abs(ref) / ref)


def to_dense(
    op: "PauliOp | CliffordOp | CliffordCircuit", limit: int = DENSE_LIMIT_DEFAULT
) -> np.ndarray:
    """Dense matrix of a Pauli, Clifford, or circuit.

    Pauli phases are exact; Clifford/circuit results are normalized so the
    first nonzero entry of the first column is positive real (the tableau
    fixes the operator only modulo global phase).

    Raises:
        ResourceLimitError: If the operator acts on more than ``limit`` qubits.
    """
    if isinstance(op, PauliOp):
        return op.to_dense(limit)
    if isinstance(op, CliffordCircuit):
        m = 0
        for gate in op.gates:
            m = max(m, *[q + 1 for q in gate[1:]])
        if m > limit:
            raise ResourceLimitError(
                f"dense circuit on {m} qubits exceeds limit {limit}"
            )
        return _normalize_global_phase(circuit_unitary(op, m))
    if isinstance(op, CliffordOp):
        if op.m > limit:
            raise ResourceLimitError(
                f"dense Clifford on {op.m} qubits exceeds limit {limit}; "
                "raise the limit or stay in tableau form"
            )
        mat = circuit_unitary(synthesize(op), op.m)
        return _normalize_global_phase(mat)
    raise InvalidOperatorError(f"cannot densify {type(op).__name__}")


# ---------------------------------------------------------------------------
# Random sampling and twirl checks
# ---------------------------------------------------------------------------


def random_clifford(m: int, rng: int | np.random.Generator | None = None) -> CliffordOp:
    """Samples a uniformly random Clifford (mod phase) on ``m`` qubits.

    Builds a symplectic basis pair by pair — each image pair is uniform over
    the symplectic complement of the committed pairs — then assigns uniform
    sign bits.  Every tableau is produced with equal probability (24 classes
    at m=1, 11520 at m=2; both verified by enumeration in the tests).
    """
    if m <= 0:
        raise InvalidDimensionError(f"qubit count must be positive, got {m}")
    rng = np.random.default_rng(rng)
    mm = 2 * m
    mask = (1 << m) - 1

    def omega(v: int) -> int:  # row such that row . w = <v, w>
        return (v >> m) | ((v & mask) << m)

    constraints = LinearSystem(mm)
    a_list: list[int] = []
    b_list: list[int] = []
    for _ in range(m):
        sys_a = constraints.copy()
        while True:
            a = sys_a.sample_solution(rng).bits
            if a:
                break
        sys_b = constraints.copy()
        sys_b.add(omega(a), 1)
        b = sys_b.sample_solution(rng).bits
        constraints.add(omega(a), 0)
        constraints.add(omega(b), 0)
        a_list.append(a)
        b_list.append(b)

    rows = []
    for v in a_list + b_list:
        x, z = v & mask, v >> m
        sign = int(rng.integers(0, 2))
        rows.append(PauliOp(m, x, z, (_parity(x & z) + 2 * sign) % 4))
    return CliffordOp(m, tuple(rows))


def random_density_matrix(m: int, rng: np.random.Generator) -> np.ndarray:
    """A random full-rank density matrix (Ginibre construction)."""
    d = 1 << m
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def pauli_twirl_check(
    m: int, rng: int | np.random.Generator | None = None, trials: int = 5
) -> float:
    """Max deviation of the exact Pauli twirl from the maximally mixed state.

    Averages ``P rho P^dag`` over all ``4^m`` Pauli classes for random dense
    states; the result must equal ``I / 2^m`` exactly (up to float error).

    Args:
        m: Qubit count, at most 3.
        rng: Seed or Generator.
        trials: Number of random input states.

    Returns:
        The largest entrywise deviation observed.
    """
    if m > 3:
        raise ResourceLimitError(
            f"exact Pauli twirl enumerates 4^m Paulis; m={m} > 3 is not supported"
        )
    rng = np.random.default_rng(rng)
    d = 1 << m
    paulis = [
        PauliOp(m, x, z, 0).to_dense()
        for x in range(1 << m)
        for z in range(1 << m)
    ]
    worst = 0.0
    for _ in range(trials):
        rho = random_density_matrix(m, rng)
        avg = sum(p @ rho @ p.conj().T for p in paulis) / (4**m)
        worst = max(worst, float(np.max(np.abs(avg - np.eye(d) / d))))
    return worst


@lru_cache(maxsize=None)
def enumerate_group_mod_phase(m: int) -> frozenset[CliffordOp]:
    """All Cliffords on ``m`` qubits mod phase, by closure under generators.

    Only feasible for m <= 2 (|C_1| = 24, |C_2| = 11520); used as an oracle.
    """
    if m > 2:
        raise ResourceLimitError("group enumeration is only supported for m <= 2")
    gates = [gate_clifford("H", (q,), m) for q in range(m)]
    gates += [gate_clifford("S", (q,), m) for q in range(m)]
    if m == 2:
        gates.append(gate_clifford("CNOT", (0, 1), m))
        gates.append(gate_clifford("CNOT", (1, 0), m))
    seen = {CliffordOp.identity(m)}
    frontier = list(seen)
    while frontier:
        nxt = []
        for c in frontier:
            for g in gates:
                cand = compose(g, c)
                if cand not in seen:
                    seen.add(cand)
                    nxt.append(cand)
        frontier = nxt
    return frozenset(seen)
