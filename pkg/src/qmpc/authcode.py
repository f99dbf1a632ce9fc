"""Trap-augmented Clifford authentication, Pauli filters, and the trap-twirl test.

The authentication scheme wraps one data qubit with ``n`` trap qubits in
|0>, conjugated by a secret (n+1)-qubit Clifford key.  Decoding undoes the
key and measures the traps; any X-type disturbance on a trap flips it and
is caught.  This module provides:

* ``enc`` / ``dec`` — the physical encode/decode acting on backend states.
* ``acceptance_events`` — the exact classical fold of a Pauli attack
  through a key: accept flag, logical alteration flag, residual data Pauli.
* Pauli filters — channels that split an attack into a pass branch and a
  caught branch according to its Pauli components on a watched register,
  with two independent implementations (classical component bookkeeping
  and a physically simulated reference-pair circuit).
* ``gl_twirl_distance`` — compares the ideal all-zero trap check against
  the implementable "randomize by an invertible linear map, then check one
  half" test, on the abstract syndrome register.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidOperatorError,
    ResourceLimitError,
)
from .gf2 import BitMatrix, BitVec, random_invertible
from .pauli_clifford import (
    CliffordOp,
    PauliOp,
    conjugate_pauli,
    enumerate_group_mod_phase,
    inverse,
)

KIND_FULL = "full-pauli-set"
KIND_ID = "id"
KIND_X = "x"
KIND_ZERO = "zero"
_KINDS = (KIND_FULL, KIND_ID, KIND_X, KIND_ZERO)


@dataclass(frozen=True)
class CodeParams:
    """Parameters of the authentication code: ``n`` traps per data qubit."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidDimensionError("trap count n must be >= 1")


@dataclass(frozen=True)
class FilterSpec:
    """Which Pauli components of an attack on register S may pass.

    kind:
      - "id":   only the identity component passes.
      - "x":    components with trivial X-part pass (harmless to a
                computational-basis readout).
      - "zero": register S is |0...0> and measured; passes iff the outcome
                is still all zeros.  Same pass set as "x" but the residual
                on the pass branch is the coherent sum over Z-parts.
      - "full-pauli-set": explicit pass set of (x_bits, z_bits) pairs.
    """

    kind: str
    s_qubits: int
    pauli_set: frozenset[tuple[int, int]] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise InvalidOperatorError(f"unknown filter kind {self.kind!r}")
        if self.s_qubits < 1:
            raise InvalidDimensionError("filter register must hold >= 1 qubit")
        if self.kind == KIND_FULL and self.pauli_set is None:
            raise InvalidOperatorError("full-pauli-set filter needs pauli_set")

    def passes(self, x_bits: int, z_bits: int) -> bool:
        if self.kind == KIND_ID:
            return x_bits == 0 and z_bits == 0
        if self.kind in (KIND_X, KIND_ZERO):
            return x_bits == 0
        assert self.pauli_set is not None
        return (x_bits, z_bits) in self.pauli_set


# ---------------------------------------------------------------------------
# Physical encode / decode on backend states
# ---------------------------------------------------------------------------


def enc(params: CodeParams, state, data_id, trap_ids, key: CliffordOp) -> None:
    """Append ``n`` zero traps and apply the key to (data, traps) in place."""
    if len(trap_ids) != params.n:
        raise InvalidDimensionError(
            f"expected {params.n} trap ids, got {len(trap_ids)}"
        )
    if key.m != params.n + 1:
        raise InvalidDimensionError(
            f"key acts on {key.m} qubits, code needs {params.n + 1}"
        )
    state.append_zeros(tuple(trap_ids))
    state.apply_clifford(key, (data_id, *trap_ids))


def dec(params: CodeParams, state, data_id, trap_ids, key: CliffordOp, rng) -> bool:
    """Undo the key, measure out the traps; True iff all traps read 0.

    The data qubit stays in the state under ``data_id``.  On a False
    return the caller must treat the wire as the reject marker; the marker
    is an out-of-band flag, not a quantum state.
    """
    if len(trap_ids) != params.n:
        raise InvalidDimensionError(
            f"expected {params.n} trap ids, got {len(trap_ids)}"
        )
    if key.m != params.n + 1:
        raise InvalidDimensionError(
            f"key acts on {key.m} qubits, code needs {params.n + 1}"
        )
    state.apply_clifford(inverse(key), (data_id, *trap_ids))
    accept = True
    for trap in trap_ids:
        outcome, _ = state.measure_remove(trap, rng)
        accept = accept and outcome == 0
    return accept


# ---------------------------------------------------------------------------
# Exact classical fold of a Pauli attack through a key
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcceptanceEvents:
    """Outcome of decoding a Pauli-attacked ciphertext, computed exactly.

    ``accept``            — the trap measurement passes (deterministic for
                            a Pauli attack under a fixed key).
    ``logically_altered`` — the residual action on the data qubit is not
                            the identity class.
    ``residual``          — the data-qubit Pauli left after decoding.
    """

    accept: bool
    logically_altered: bool
    residual: PauliOp


def acceptance_events(
    params: CodeParams, key: CliffordOp, attack: PauliOp
) -> AcceptanceEvents:
    """Fold ``attack`` (on the ciphertext) through ``key`` and classify."""
    n = params.n
    if key.m != n + 1 or attack.m != n + 1:
        raise InvalidDimensionError("key and attack must act on n+1 qubits")
    folded = conjugate_pauli(inverse(key), attack)
    trap_mask = ((1 << (n + 1)) - 1) & ~1
    accept = (folded.x & trap_mask) == 0
    residual = PauliOp(1, folded.x & 1, folded.z & 1, 0)
    return AcceptanceEvents(
        accept=accept,
        logically_altered=not residual.is_identity_class(),
        residual=residual,
    )


def accept_probability_surrogate(n: int) -> Fraction:
    """Exact accept rate of a fixed non-identity Pauli attack, random key.

    A uniform key maps the attack class uniformly over the 4^(n+1)-1
    non-identity classes; those that pass the trap check have zero X-part
    on all n traps: 2 data X choices x 2^(n+1) Z choices minus identity.
    """
    return Fraction(2 ** (n + 2) - 1, 4 ** (n + 1) - 1)


@lru_cache(maxsize=None)
def symplectic_key_representatives(m: int) -> tuple[CliffordOp, ...]:
    """One zero-sign Clifford per tableau class modulo Pauli factors (m <= 2).

    Acceptance and alteration events depend only on how the key permutes
    Pauli classes, so averaging over these representatives equals the
    average over all keys.
    """
    reps: dict = {}
    for c in enumerate_group_mod_phase(m):
        sm = c.symplectic_matrix()
        if sm in reps:
            continue
        rows = tuple(
            PauliOp(m, r.x, r.z, r.phase & 1) for r in c.rows
        )
        reps[sm] = CliffordOp(m, rows)
    return tuple(reps.values())


# ---------------------------------------------------------------------------
# Pauli filters
# ---------------------------------------------------------------------------


def pauli_filter(spec: FilterSpec, attack: PauliOp) -> tuple[int, PauliOp]:
    """Classify a Pauli attack on S: (flag, residual).

    flag 0 = passes, 1 = caught.  For Pauli attacks the classification is
    deterministic and exact.  The residual is the Pauli still acting after
    a pass; a "zero"-kind pass absorbs the attack entirely (the register
    is measured away in the all-zero state).  Dense non-Pauli attacks are
    handled at the channel level by ``filter_channels``.
    """
    if not isinstance(attack, PauliOp):
        raise InvalidOperatorError(
            "pauli_filter classifies PauliOp attacks; "
            "use filter_channels for dense unitaries"
        )
    if attack.m != spec.s_qubits:
        raise InvalidDimensionError(
            f"attack acts on {attack.m} qubits, filter register has "
            f"{spec.s_qubits}"
        )
    flag = 0 if spec.passes(attack.x, attack.z) else 1
    if flag == 0 and spec.kind == KIND_ZERO:
        residual = PauliOp.identity(attack.m)
    else:
        residual = attack
    return flag, residual


def zero_filter(attack: PauliOp) -> tuple[int, PauliOp]:
    """Zero filter on the attack's own register: flag 0 iff X-part is 0."""
    return pauli_filter(FilterSpec(KIND_ZERO, attack.m), attack)


@lru_cache(maxsize=256)
def _pauli_dense_cached(s: int, a: int, b: int) -> np.ndarray:
    return PauliOp(s, a, b).to_dense()


def filter_channels(
    spec: FilterSpec, u: np.ndarray, route: str = "analytic"
) -> dict[int, list[np.ndarray]]:
    """Flag-indexed Kraus families of the filtered attack channel.

    ``u`` is a unitary on S (first ``spec.s_qubits`` qubits, most
    significant) and a side register T (the rest).  Returns
    ``{0: [...], 1: [...]}`` with Kraus operators acting on T.

    route="analytic": Pauli-component bookkeeping — decompose
    U = sum_(a,b) (X^a Z^b)_S (x) U_(a,b); pass components are kept
    incoherently, except the "zero" kind whose pass branch is the single
    coherent operator sum_b U_(0,b) (and per-outcome coherent sums on the
    caught branch).

    route="physical": simulate the defining circuit — reference pairs and
    a joint Pauli-basis measurement for the Pauli-set kinds, or an
    all-zero ancilla with a computational readout for the "zero" kind.
    """
    s = spec.s_qubits
    dim = u.shape[0]
    if u.ndim != 2 or u.shape != (dim, dim) or dim & (dim - 1):
        raise InvalidOperatorError("attack must be a square 2^k matrix")
    total = dim.bit_length() - 1
    t = total - s
    if t < 1:
        raise InvalidDimensionError("attack must act on S plus a side register")
    if s > 2 or total > 4:
        raise ResourceLimitError("dense filter path supports |S|<=2, |S|+|T|<=4")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-9):
        raise InvalidOperatorError("attack must be unitary")
    ds, dt = 1 << s, 1 << t
    u4 = np.asarray(u, dtype=complex).reshape(ds, dt, ds, dt)

    branches: dict[int, list[np.ndarray]] = {0: [], 1: []}
    if route == "analytic":
        components: dict[tuple[int, int], np.ndarray] = {}
        for a in range(ds):
            for b in range(ds):
                m_ab = _pauli_dense_cached(s, a, b)
                components[(a, b)] = (
                    np.einsum("ij,itju->tu", m_ab.conj(), u4) / ds
                )
        if spec.kind == KIND_ZERO:
            for a in range(ds):
                kraus = sum(components[(a, b)] for b in range(ds))
                branches[0 if a == 0 else 1].append(kraus)
        else:
            for (a, b), kraus in components.items():
                branches[0 if spec.passes(a, b) else 1].append(kraus)
        return branches

    if route != "physical":
        raise InvalidOperatorError(f"unknown filter route {route!r}")

    # The circuit outputs live on (T, T') with the reference pair on T
    # already contracted in; rescale by sqrt(dt) to recover the Kraus
    # operator itself (column u of the output = K applied to |u>/sqrt(dt)).
    if spec.kind == KIND_ZERO:
        # |0>_S with a reference pair on T; measure S computationally.
        psi = np.zeros((ds, dt, dt), dtype=complex)
        for tt in range(dt):
            psi[0, tt, tt] = 1.0 / np.sqrt(dt)
        out = np.einsum("abit,itu->abu", u4, psi)
        for a in range(ds):
            branches[0 if a == 0 else 1].append(out[a] * np.sqrt(dt))
        return branches

    # Reference pairs on S and T; joint Pauli-frame measurement on (S, S').
    psi = np.zeros((ds, dt, ds, dt), dtype=complex)
    for i in range(ds):
        for tt in range(dt):
            psi[i, tt, i, tt] = 1.0 / np.sqrt(ds * dt)
    out = np.einsum("abit,itcu->abcu", u4, psi)
    for a in range(ds):
        for b in range(ds):
            w = _pauli_dense_cached(s, a, b) / np.sqrt(ds)
            v = np.einsum("ac,abcu->bu", w.conj(), out)
            branches[0 if spec.passes(a, b) else 1].append(v * np.sqrt(dt))
    return branches


def _choi_blocks(branches: dict[int, list[np.ndarray]]) -> dict[int, np.ndarray]:
    blocks: dict[int, np.ndarray] = {}
    for flag, kraus_list in branches.items():
        if not kraus_list:
            blocks[flag] = None
            continue
        dt = kraus_list[0].shape[0]
        j = np.zeros((dt * dt, dt * dt), dtype=complex)
        for k in kraus_list:
            v = (k / np.sqrt(dt)).reshape(-1)
            j += np.outer(v, v.conj())
        blocks[flag] = j
    return blocks


def filter_equivalence_check(spec: FilterSpec, u: np.ndarray) -> float:
    """Max |Choi entry difference| between the two filter routes."""
    analytic = _choi_blocks(filter_channels(spec, u, route="analytic"))
    physical = _choi_blocks(filter_channels(spec, u, route="physical"))
    dev = 0.0
    for flag in (0, 1):
        ja, jp = analytic[flag], physical[flag]
        if ja is None and jp is None:
            continue
        dt2 = ja.shape[0] if ja is not None else jp.shape[0]
        ja = ja if ja is not None else np.zeros((dt2, dt2), dtype=complex)
        jp = jp if jp is not None else np.zeros((dt2, dt2), dtype=complex)
        dev = max(dev, float(np.max(np.abs(ja - jp))))
    return dev


# ---------------------------------------------------------------------------
# Trap twirl over invertible linear maps
# ---------------------------------------------------------------------------
#
# Abstract syndrome register of dimension 2^(2n), basis |x> for x in
# F_2^(2n) (component i of x = bit i of the index).  The ideal trap test
# keeps only the |0...0> syndrome; the implementable test randomizes by a
# uniform invertible linear map g (|x> -> |gx>) and then checks the top
# half (components n..2n-1) against a target string s.


def _lifted_check(pi_diag: np.ndarray | None, rho: np.ndarray) -> np.ndarray:
    """L^Pi(rho) = Pi rho Pi (+) Tr[(1-Pi) rho] on an extra reject slot."""
    d = rho.shape[0]
    out = np.zeros((d + 1, d + 1), dtype=complex)
    if pi_diag is None:
        out[d, d] = np.trace(rho).real
        return out
    keep = pi_diag.astype(bool)
    block = rho.copy()
    block[~keep, :] = 0.0
    block[:, ~keep] = 0.0
    out[:d, :d] = block
    out[d, d] = np.trace(rho).real - np.trace(block).real
    return out


def _gl_permutation(mat: BitMatrix, n2: int) -> np.ndarray:
    d = 1 << n2
    perm = np.empty(d, dtype=np.int64)
    for x in range(d):
        perm[x] = mat.mat_vec(BitVec(x, n2)).bits
    return perm


def _enumerate_gl2() -> list[BitMatrix]:
    mats = []
    for mask in range(16):
        mat = BitMatrix((mask & 3, mask >> 2), 2)
        if mat.rank() == 2:
            mats.append(mat)
    return mats


def gl_twirl_channel_empirical(n: int, rng=None, samples: int = 3000):
    """rho -> average of |gx><gy| relabelings over invertible g.

    Exact for n=1 (all 6 invertible 2x2 maps); a uniform sample otherwise.
    """
    n2 = 2 * n
    if n == 1:
        mats = _enumerate_gl2()
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        mats = [random_invertible(n2, rng).matrix for _ in range(samples)]
    perms = [_gl_permutation(m, n2) for m in mats]

    def twirl(rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho, dtype=complex)
        for perm in perms:
            out[np.ix_(perm, perm)] += rho
        return out / len(perms)

    return twirl


def gl_twirl_channel_exact(n: int):
    """Closed form of the invertible-linear-map twirl (the frozen oracle).

    With D = 2^(2n), P = |0><0|, |u> the normalized uniform vector over
    the D-1 nonzero strings:
      |0><0|      -> |0><0|
      |x><x|, x!=0 -> (I - P) / (D-1)
      |x><0|      -> |u><0| / sqrt(D-1)        (and the adjoint case)
      |x><y|, distinct nonzero -> (|u><u| - (I-P)/(D-1)) / (D-2)
    """
    d = 1 << (2 * n)
    uniform = np.full(d, 1.0 / np.sqrt(d - 1), dtype=complex)
    uniform[0] = 0.0
    rest = np.eye(d, dtype=complex)
    rest[0, 0] = 0.0
    uu = np.outer(uniform, uniform)
    mix = rest / (d - 1)
    cross = (uu - mix) / (d - 2)

    def twirl(rho: np.ndarray) -> np.ndarray:
        a00 = rho[0, 0]
        col = np.sum(rho[1:, 0])
        row = np.sum(rho[0, 1:])
        tr_b = np.trace(rho).astype(complex) - a00
        off_b = np.sum(rho[1:, 1:]) - tr_b
        out = tr_b * mix + off_b * cross
        out[0, 0] += a00
        out[1:, 0] += col * uniform[1:] / np.sqrt(d - 1)
        out[0, 1:] += row * uniform[1:].conj() / np.sqrt(d - 1)
        return out

    return twirl


def make_twirl_test_states(n: int, rng, n_random: int = 6) -> list[np.ndarray]:
    """Density matrices probing every sector of the twirl's closed form."""
    d = 1 << (2 * n)
    uniform = np.zeros(d, dtype=complex)
    uniform[1:] = 1.0 / np.sqrt(d - 1)
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    e1 = np.zeros(d, dtype=complex)
    e1[1] = 1.0
    e2 = np.zeros(d, dtype=complex)
    e2[min(2, d - 1)] = 1.0
    states = [
        np.outer(e0, e0.conj()),
        np.outer(e1, e1.conj()),
        np.outer(uniform, uniform.conj()),
        np.outer((e0 + uniform) / np.sqrt(2), ((e0 + uniform) / np.sqrt(2)).conj()),
        np.outer((e0 + e1) / np.sqrt(2), ((e0 + e1) / np.sqrt(2)).conj()),
        np.outer((e1 + e2) / np.sqrt(2), ((e1 + e2) / np.sqrt(2)).conj()),
        np.eye(d, dtype=complex) / d,
    ]
    for _ in range(n_random):
        vec = rng.normal(size=d) + 1j * rng.normal(size=d)
        vec /= np.linalg.norm(vec)
        states.append(np.outer(vec, vec.conj()))
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = g @ g.conj().T
        states.append(rho / np.trace(rho).real)
    return states


def gl_twirl_distance(
    n: int,
    states: list[np.ndarray] | None = None,
    s_values: tuple[int, ...] | None = None,
    rng=None,
    samples: int = 3000,
) -> dict[int, float]:
    """Per-s max trace distance: ideal zero-check vs twirl-then-half-check.

    For each target string s and test state rho, compares
    L^(Pi_s_ideal)(rho) — the ideal filter that accepts only the all-zero
    syndrome and only when s = 0 — against L^(Pi_s_half)(T(rho)) where T
    is the empirical invertible-map twirl and Pi_s_half checks the top
    half of the syndrome against s.
    """
    if n > 4:
        raise ResourceLimitError("dense twirl comparison supports n <= 4")
    if rng is None:
        rng = np.random.default_rng(0)
    if states is None:
        states = make_twirl_test_states(n, rng)
    if s_values is None:
        s_values = (0, 1, (1 << n) - 1)
    d = 1 << (2 * n)
    twirl = gl_twirl_channel_empirical(n, rng=rng, samples=samples)
    xs = np.arange(d)
    result: dict[int, float] = {}
    for s in s_values:
        if not 0 <= s < (1 << n):
            raise InvalidDimensionError("target string s must have n bits")
        if s == 0:
            pi_ideal = np.zeros(d)
            pi_ideal[0] = 1.0
        else:
            pi_ideal = None
        pi_half = ((xs >> n) == s).astype(float)
        worst = 0.0
        for rho in states:
            lhs = _lifted_check(pi_ideal, rho)
            rhs = _lifted_check(pi_half, twirl(rho))
            worst = max(worst, float(np.linalg.norm(lhs - rhs, ord="nuc")))
        result[s] = worst
    return result
