"""Quantum state backends: stabilizer tableau, dense vector, symbolic wire.

Three representations with one operational contract:

- :class:`StabilizerState` — a CHP-style tableau with destabilizer rows;
  Clifford-only, any register size used here.  Destructive Z measurement
  collapses, rewrites the generating set so one generator is ``+/-Z_q``, and
  removes the qubit from the tableau.
- :class:`DenseState` — a complex state vector (default limit 20 qubits);
  supports arbitrary unitaries and non-Clifford basis measurements.
- :class:`AuthWire` — a symbolic authenticated wire: the logical content
  lives elsewhere (``logical_ref``), while the authentication key and the
  accumulated plaintext-frame Pauli deviation (``trap_error``) are tracked
  algebraically.  Keys are lazy: an honest execution never materializes them,
  and folding the first adversarial Pauli samples the key on demand.

External qubit ids are stable labels; methods take ids, and destructive
measurement deletes the id while the remaining labels keep meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidOperatorError,
    ProtocolViolationError,
    ResourceLimitError,
)
from .pauli_clifford import (
    CliffordOp,
    PauliOp,
    apply_unitary,
    conjugate_pauli,
    conjugate_pauli_on,
    conjugation_masks,
    inverse,
    random_clifford,
    synthesize,
    GATE_UNITARIES,
)

__all__ = [
    "StabilizerState",
    "DenseState",
    "AuthWire",
    "prepare",
    "apply_clifford",
    "apply_pauli",
    "apply_gate_dense",
    "measure_z",
    "measure_T_basis",
    "authwire_apply_attack",
    "DENSE_QUBIT_LIMIT",
]

DENSE_QUBIT_LIMIT = 20

_T_STATE = np.array([1.0, np.exp(1j * np.pi / 4)]) / np.sqrt(2)


def _parity(v: int) -> int:
    return v.bit_count() & 1


def _delete_bit(bits: int, q: int) -> int:
    low = bits & ((1 << q) - 1)
    high = (bits >> (q + 1)) << q
    return low | high


class StabilizerState:
    """A pure stabilizer state on labeled qubits, CHP tableau with destabilizers.

    Only the pairing property of the destabilizers (``<D_i, S_j> = delta_ij``)
    is relied on; destabilizer phases are not meaningful.
    """

    def __init__(self, m: int, ids: tuple | None = None) -> None:
        if m < 0:
            raise InvalidDimensionError(f"qubit count must be >= 0, got {m}")
        self.ids: list = list(ids) if ids is not None else list(range(m))
        if len(self.ids) != m or len(set(self.ids)) != m:
            raise InvalidDimensionError("ids must be distinct and match m")
        # destabilizers then stabilizers, one row per qubit
        self.dx = [1 << q for q in range(m)]
        self.dz = [0] * m
        self.dp = [0] * m
        self.sx = [0] * m
        self.sz = [1 << q for q in range(m)]
        self.sp = [0] * m

    @property
    def m(self) -> int:
        return len(self.ids)

    def copy(self) -> "StabilizerState":
        dup = StabilizerState.__new__(StabilizerState)
        dup.ids = list(self.ids)
        dup.dx, dup.dz, dup.dp = list(self.dx), list(self.dz), list(self.dp)
        dup.sx, dup.sz, dup.sp = list(self.sx), list(self.sz), list(self.sp)
        return dup

    def _col(self, qubit_id) -> int:
        try:
            return self.ids.index(qubit_id)
        except ValueError:
            raise InvalidDimensionError(f"unknown qubit id {qubit_id!r}") from None

    def append_zeros(self, new_ids: tuple) -> None:
        """Adjoins fresh ``|0>`` qubits with the given ids."""
        for nid in new_ids:
            if nid in self.ids:
                raise InvalidDimensionError(f"duplicate qubit id {nid!r}")
            q = self.m
            self.ids.append(nid)
            self.dx.append(1 << q)
            self.dz.append(0)
            self.dp.append(0)
            self.sx.append(0)
            self.sz.append(1 << q)
            self.sp.append(0)

    # -- row helpers --------------------------------------------------------

    def _rows(self):
        for arr_x, arr_z, arr_p in ((self.dx, self.dz, self.dp), (self.sx, self.sz, self.sp)):
            for i in range(len(arr_x)):
                yield arr_x, arr_z, arr_p, i

    # -- operations ----------------------------------------------------------

    def apply_clifford(self, c: CliffordOp, qubit_ids: tuple) -> None:
        cols = tuple(self._col(q) for q in qubit_ids)
        if c.m != len(cols):
            raise InvalidDimensionError(
                f"clifford acts on {c.m} qubits, got {len(cols)} ids"
            )
        if c.m <= 3:
            # Bulk row update through the pre-scattered conjugation table.
            off_mask, table = conjugation_masks(c, cols)
            mm = c.m
            for arr_x, arr_z, arr_p in (
                (self.dx, self.dz, self.dp),
                (self.sx, self.sz, self.sp),
            ):
                for i in range(len(arr_x)):
                    xv, zv = arr_x[i], arr_z[i]
                    idx = 0
                    for j, q in enumerate(cols):
                        idx |= ((xv >> q) & 1) << j
                        idx |= ((zv >> q) & 1) << (mm + j)
                    nx, nz, dph = table[idx]
                    arr_x[i] = (xv & off_mask) | nx
                    arr_z[i] = (zv & off_mask) | nz
                    if dph:
                        arr_p[i] = (arr_p[i] + dph) & 3
            return
        m = self.m
        for arr_x, arr_z, arr_p, i in self._rows():
            row = PauliOp(m, arr_x[i], arr_z[i], arr_p[i])
            out = conjugate_pauli_on(c, cols, row)
            arr_x[i], arr_z[i], arr_p[i] = out.x, out.z, out.phase

    def apply_pauli(self, p: PauliOp, qubit_ids: tuple) -> None:
        cols = tuple(self._col(q) for q in qubit_ids)
        px, pz = 0, 0
        for i, q in enumerate(cols):
            if (p.x >> i) & 1:
                px |= 1 << q
            if (p.z >> i) & 1:
                pz |= 1 << q
        for arr_x, arr_z, arr_p, i in self._rows():
            flip = _parity(px & arr_z[i]) ^ _parity(pz & arr_x[i])
            if flip:
                arr_p[i] = (arr_p[i] + 2) % 4

    def measure_remove(
        self,
        qubit_id,
        rng: np.random.Generator | None = None,
        forced: int | None = None,
    ) -> tuple[int, float]:
        """Destructively measures one qubit in the Z basis.

        Returns ``(outcome, probability_of_that_outcome)``.  With ``forced``
        given, the outcome is forced; if its probability is 0 the state is
        left untouched and ``(forced, 0.0)`` is returned.
        """
        q = self._col(qubit_id)
        m = self.m
        anti = [i for i in range(m) if (self.sx[i] >> q) & 1]
        if anti:
            if forced is not None:
                outcome = forced
            else:
                if rng is None:
                    raise ProtocolViolationError("random outcome requires an rng")
                outcome = int(rng.integers(0, 2))
            prob = 0.5
            piv = anti[0]
            old = (self.sx[piv], self.sz[piv], self.sp[piv])
            # multiply every other row carrying x_q by the old pivot
            for i in range(m):
                if (self.dx[i] >> q) & 1:
                    self.dp[i] = (self.dp[i] + old[2] + 2 * _parity(self.dz[i] & old[0])) % 4
                    self.dx[i] ^= old[0]
                    self.dz[i] ^= old[1]
            for i in range(m):
                if i != piv and (self.sx[i] >> q) & 1:
                    self.sp[i] = (self.sp[i] + old[2] + 2 * _parity(self.sz[i] & old[0])) % 4
                    self.sx[i] ^= old[0]
                    self.sz[i] ^= old[1]
            self.dx[piv], self.dz[piv], self.dp[piv] = old
            self.sx[piv], self.sz[piv], self.sp[piv] = 0, 1 << q, 2 * outcome
            drop = piv
        else:
            idxs = [i for i in range(m) if (self.dx[i] >> q) & 1]
            px, pz, pp = 0, 0, 0
            for i in idxs:
                pp = (pp + self.sp[i] + 2 * _parity(pz & self.sx[i])) % 4
                px ^= self.sx[i]
                pz ^= self.sz[i]
            if px != 0 or pz != (1 << q):
                raise ProtocolViolationError("tableau invariant broken")  # pragma: no cover
            det = pp // 2
            if forced is not None and forced != det:
                return forced, 0.0
            outcome, prob = det, 1.0
            i0 = idxs[0]
            self.sx[i0], self.sz[i0], self.sp[i0] = px, pz, pp
            for j in idxs[1:]:
                self.dp[j] = (self.dp[j] + self.dp[i0] + 2 * _parity(self.dz[j] & self.dx[i0])) % 4
                self.dx[j] ^= self.dx[i0]
                self.dz[j] ^= self.dz[i0]
            drop = i0
        # clear z_q from the other stabilizer rows using the +/-Z_q generator
        for i in range(m):
            if i != drop and (self.sz[i] >> q) & 1:
                self.sp[i] = (self.sp[i] + self.sp[drop]) % 4
                self.sz[i] ^= self.sz[drop]
        # drop the generator pair and delete the bit column
        for arr in (self.dx, self.dz, self.dp, self.sx, self.sz, self.sp):
            arr.pop(drop)
        self.ids.pop(q)
        for arr in (self.dx, self.dz, self.sx, self.sz):
            for i in range(len(arr)):
                arr[i] = _delete_bit(arr[i], q)
        return outcome, prob

    def outcome_probability(self, qubit_id, outcome: int) -> float:
        """Probability of ``outcome`` for a Z measurement, without collapsing."""
        q = self._col(qubit_id)
        if any((x >> q) & 1 for x in self.sx):
            return 0.5
        idxs = [i for i in range(self.m) if (self.dx[i] >> q) & 1]
        pp, px, pz = 0, 0, 0
        for i in idxs:
            pp = (pp + self.sp[i] + 2 * _parity(pz & self.sx[i])) % 4
            px ^= self.sx[i]
            pz ^= self.sz[i]
        det = pp // 2
        return 1.0 if outcome == det else 0.0

    def to_dense_vector(self) -> np.ndarray:
        """Dense amplitudes (global phase arbitrary); for small-m testing."""
        m = self.m
        if m > 12:
            raise ResourceLimitError("dense reconstruction limited to 12 qubits")
        d = 1 << m
        proj = np.eye(d, dtype=complex)
        for i in range(m):
            s = PauliOp(m, self.sx[i], self.sz[i], self.sp[i]).to_dense()
            proj = proj @ (np.eye(d) + s) / 2
        # any column with nonzero norm is the state
        norms = np.linalg.norm(proj, axis=0)
        col = int(np.argmax(norms))
        vec = proj[:, col]
        return vec / np.linalg.norm(vec)


class DenseState:
    """A normalized complex state vector on labeled qubits."""

    def __init__(self, vec: np.ndarray, ids: tuple | None = None, limit: int = DENSE_QUBIT_LIMIT) -> None:
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        m = int(vec.size).bit_length() - 1
        if (1 << m) != vec.size:
            raise InvalidDimensionError(f"amplitude count {vec.size} is not a power of 2")
        if m > limit:
            raise ResourceLimitError(
                f"dense state on {m} qubits exceeds limit {limit}; "
                "use the tableau or symbolic backend"
            )
        if abs(np.linalg.norm(vec) - 1.0) > 1e-9:
            raise InvalidOperatorError("state vector is not normalized")
        self.vec = vec
        self.ids: list = list(ids) if ids is not None else list(range(m))
        if len(self.ids) != m or len(set(self.ids)) != m:
            raise InvalidDimensionError("ids must be distinct and match the size")
        self.limit = limit

    @property
    def m(self) -> int:
        return len(self.ids)

    def copy(self) -> "DenseState":
        dup = DenseState.__new__(DenseState)
        dup.vec = self.vec.copy()
        dup.ids = list(self.ids)
        dup.limit = self.limit
        return dup

    def _col(self, qubit_id) -> int:
        try:
            return self.ids.index(qubit_id)
        except ValueError:
            raise InvalidDimensionError(f"unknown qubit id {qubit_id!r}") from None

    def append_zeros(self, new_ids: tuple) -> None:
        count = len(new_ids)
        if self.m + count > self.limit:
            raise ResourceLimitError(
                f"appending {count} qubits would exceed the dense limit {self.limit}"
            )
        for nid in new_ids:
            if nid in self.ids:
                raise InvalidDimensionError(f"duplicate qubit id {nid!r}")
        pad = np.zeros(1 << count, dtype=complex)
        pad[0] = 1.0
        self.vec = np.kron(self.vec, pad)
        self.ids.extend(new_ids)

    def append_state(self, other: "DenseState") -> None:
        if self.m + other.m > self.limit:
            raise ResourceLimitError(
                f"merging to {self.m + other.m} qubits exceeds the dense limit {self.limit}"
            )
        if set(self.ids) & set(other.ids):
            raise InvalidDimensionError("overlapping qubit ids in merge")
        self.vec = np.kron(self.vec, other.vec)
        self.ids.extend(other.ids)

    def apply_clifford(self, c: CliffordOp, qubit_ids: tuple) -> None:
        cols = tuple(self._col(q) for q in qubit_ids)
        if c.m != len(cols):
            raise InvalidDimensionError(
                f"clifford acts on {c.m} qubits, got {len(cols)} ids"
            )
        for gate in synthesize(c).gates:
            name, qs = gate[0], tuple(cols[q] for q in gate[1:])
            self.vec = apply_unitary(self.vec, GATE_UNITARIES[name], qs, self.m)

    def apply_gate(self, name: str, qubit_ids: tuple) -> None:
        cols = tuple(self._col(q) for q in qubit_ids)
        self.vec = apply_unitary(self.vec, GATE_UNITARIES[name], cols, self.m)

    def apply_unitary_matrix(self, u: np.ndarray, qubit_ids: tuple) -> None:
        u = np.asarray(u, dtype=complex)
        k = len(qubit_ids)
        if u.shape != (1 << k, 1 << k):
            raise InvalidDimensionError(
                f"matrix shape {u.shape} does not act on {k} qubits"
            )
        if np.max(np.abs(u @ u.conj().T - np.eye(1 << k))) > 1e-9:
            raise InvalidOperatorError("matrix is not unitary to 1e-9")
        cols = tuple(self._col(q) for q in qubit_ids)
        self.vec = apply_unitary(self.vec, u, cols, self.m)

    def apply_pauli(self, p: PauliOp, qubit_ids: tuple) -> None:
        cols = tuple(self._col(q) for q in qubit_ids)
        for i, q in enumerate(cols):
            xb, zb = (p.x >> i) & 1, (p.z >> i) & 1
            if xb or zb:
                mat = {(1, 0): "X", (0, 1): "Z"}.get((xb, zb))
                if mat is None:
                    self.vec = apply_unitary(
                        self.vec, GATE_UNITARIES["X"] @ GATE_UNITARIES["Z"], (q,), self.m
                    )
                else:
                    self.vec = apply_unitary(self.vec, GATE_UNITARIES[mat], (q,), self.m)
        if p.phase:
            self.vec = (1j ** p.phase) * self.vec

    def measure_remove(
        self,
        qubit_id,
        rng: np.random.Generator | None = None,
        forced: int | None = None,
    ) -> tuple[int, float]:
        """Destructive Z measurement; see StabilizerState.measure_remove."""
        q = self._col(qubit_id)
        tens = self.vec.reshape((2,) * self.m)
        sl0 = np.take(tens, 0, axis=q)
        sl1 = np.take(tens, 1, axis=q)
        p0 = float(np.sum(np.abs(sl0) ** 2))
        probs = (p0, 1.0 - p0)
        if forced is not None:
            outcome = forced
        else:
            if rng is None:
                raise ProtocolViolationError("random outcome requires an rng")
            outcome = int(rng.random() >= p0)
        prob = probs[outcome]
        if prob < 1e-12:
            return outcome, 0.0
        kept = (sl0, sl1)[outcome].reshape(-1)
        self.vec = kept / np.sqrt(prob)
        self.ids.pop(q)
        return outcome, prob

    def outcome_probability(self, qubit_id, outcome: int) -> float:
        q = self._col(qubit_id)
        tens = self.vec.reshape((2,) * self.m)
        p0 = float(np.sum(np.abs(np.take(tens, 0, axis=q)) ** 2))
        return p0 if outcome == 0 else 1.0 - p0

    def measure_basis_keep(
        self, qubit_id, basis_unitary: np.ndarray, rng: np.random.Generator, forced: int | None = None
    ) -> tuple[int, float]:
        """Measures in the basis ``{U|0>, U|1>}``, collapsing but keeping the qubit."""
        q = self._col(qubit_id)
        self.vec = apply_unitary(self.vec, basis_unitary.conj().T, (q,), self.m)
        tens = self.vec.reshape((2,) * self.m).copy()
        p0 = float(np.sum(np.abs(np.take(tens, 0, axis=q)) ** 2))
        probs = (p0, 1.0 - p0)
        outcome = forced if forced is not None else int(rng.random() >= p0)
        prob = probs[outcome]
        if prob < 1e-12:
            self.vec = apply_unitary(self.vec, basis_unitary, (q,), self.m)
            return outcome, 0.0
        idx = [slice(None)] * self.m
        idx[q] = 1 - outcome
        tens[tuple(idx)] = 0.0
        self.vec = tens.reshape(-1) / np.sqrt(prob)
        self.vec = apply_unitary(self.vec, basis_unitary, (q,), self.m)
        return outcome, prob


@dataclass
class AuthWire:
    """Symbolic authenticated wire: lazy key + accumulated plaintext-frame error.

    Attributes:
        wire_id: Logical wire label.
        n: Trap count; the ciphertext has ``n + 1`` qubits (data then traps).
        logical_ref: Opaque reference to where the logical qubit lives.
        key: The authentication Clifford, or None while unsampled (honest runs
            never observe it).
        trap_error: The folded Pauli ``key^dag * (net physical attack) * key``
            on the n+1 plaintext-frame qubits; identity when untouched.
        pad: Optional classical Pauli pad tracked on the ciphertext.
    """

    wire_id: object
    n: int
    logical_ref: object = None
    key: CliffordOp | None = None
    trap_error: PauliOp = None  # type: ignore[assignment]
    pad: PauliOp = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.trap_error is None:
            self.trap_error = PauliOp.identity(self.n + 1)
        if self.pad is None:
            self.pad = PauliOp.identity(self.n + 1)

    def ensure_key(self, rng: np.random.Generator) -> CliffordOp:
        if self.key is None:
            self.key = random_clifford(self.n + 1, rng)
        return self.key

    def accepts_on_decode(self) -> bool:
        """True iff the trap-block X-part is clear (trap readout all zero)."""
        trap_mask = ((1 << (self.n + 1)) - 1) & ~1
        return (self.trap_error.x & trap_mask) == 0

    def logical_residual(self) -> PauliOp:
        """The residual Pauli on the data qubit after an accepting decode."""
        return PauliOp(1, self.trap_error.x & 1, self.trap_error.z & 1, 0)


def authwire_apply_attack(
    wire: AuthWire, attack: PauliOp, rng: np.random.Generator
) -> None:
    """Folds a physical Pauli attack on the ciphertext into the wire's frame.

    The ciphertext is ``key (trap_error (rho ⊗ |0^n>))``; a physical ``p``
    prepends ``key^dag p key`` to the accumulated error.  Matches the dense
    physical simulation exactly (tested exhaustively at n=1).
    """
    if attack.m != wire.n + 1:
        raise InvalidDimensionError(
            f"attack acts on {attack.m} qubits, ciphertext has {wire.n + 1}"
        )
    key = wire.ensure_key(rng)
    folded = conjugate_pauli(inverse(key), attack)
    wire.trap_error = folded.mul(wire.trap_error)


# ---------------------------------------------------------------------------
# Uniform functional interface
# ---------------------------------------------------------------------------


def prepare(
    kind: str,
    m: int = 1,
    backend: str = "tableau",
    ids: tuple | None = None,
    amplitudes: np.ndarray | None = None,
    limit: int = DENSE_QUBIT_LIMIT,
):
    """Prepares a fresh state.

    Args:
        kind: ``"zero"`` (``|0...0>``), ``"magic_T"`` (single-qubit T state,
            dense), or ``"amplitudes"`` (explicit dense vector).
        m: Qubit count for ``"zero"``.
        backend: ``"tableau"`` or ``"dense"`` for ``"zero"``.
        ids: Optional qubit labels.
        amplitudes: Vector for ``"amplitudes"``.
        limit: Dense qubit limit.

    Returns:
        StabilizerState or DenseState.
    """
    if kind == "zero":
        if backend == "tableau":
            return StabilizerState(m, ids)
        if backend == "dense":
            vec = np.zeros(1 << m, dtype=complex)
            vec[0] = 1.0
            return DenseState(vec, ids, limit)
        raise InvalidOperatorError(f"unknown backend {backend!r}")
    if kind == "magic_T":
        return DenseState(_T_STATE.copy(), ids, limit)
    if kind == "amplitudes":
        if amplitudes is None:
            raise InvalidOperatorError("kind='amplitudes' requires amplitudes")
        return DenseState(np.asarray(amplitudes), ids, limit)
    raise InvalidOperatorError(f"unknown preparation kind {kind!r}")


def apply_clifford(state, c: CliffordOp, qubit_ids: tuple) -> None:
    state.apply_clifford(c, qubit_ids)


def apply_pauli(state, p: PauliOp, qubit_ids: tuple) -> None:
    state.apply_pauli(p, qubit_ids)


def apply_gate_dense(state: DenseState, u: np.ndarray, qubit_ids: tuple) -> None:
    """Applies an arbitrary unitary; rejects non-unitary input at 1e-9."""
    if not isinstance(state, DenseState):
        raise InvalidOperatorError(
            "arbitrary dense gates require the dense backend"
        )
    state.apply_unitary_matrix(u, qubit_ids)


def measure_z(
    state,
    qubit_ids: tuple,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Destructively measures the listed qubits in order; returns their bits."""
    return [state.measure_remove(q, rng)[0] for q in qubit_ids]


_T_BASIS = None


def _t_basis_unitary() -> np.ndarray:
    global _T_BASIS
    if _T_BASIS is None:
        _T_BASIS = GATE_UNITARIES["T"] @ GATE_UNITARIES["H"]
    return _T_BASIS


def measure_T_basis(state: DenseState, qubit_id, rng: np.random.Generator) -> int:
    """Measures one qubit in the T basis; 0 is the T state, 1 its orthogonal.

    The qubit is collapsed but kept in the register.
    """
    if not isinstance(state, DenseState):
        raise InvalidOperatorError("T-basis measurement requires the dense backend")
    outcome, _ = state.measure_basis_keep(qubit_id, _t_basis_unitary(), rng)
    return outcome
