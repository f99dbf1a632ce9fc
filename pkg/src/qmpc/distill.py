"""Magic-state supply chain: twirling, cut-and-choose testing, distillation.

Non-Clifford gates enter the evaluation protocol only through magic-basis
resource states, so their quality is the whole game.  This module provides
the four layers of that supply chain:

- **Dephasing twirl** (:func:`dephase_T`): applying ``Ẑ = S·X`` to a qubit
  with probability 1/2 kills coherences in the magic basis, turning an
  arbitrary single-qubit deviation into a classical basis flip.  That
  reduction is what lets the rest of the pipeline reason about one error
  *bit* per copy.
- **15-to-1 block distillation** (:func:`bk_distill_block`,
  :func:`distill_circuit`): a self-dual CSS code on 15 qubits whose parity
  checks are the four index-bit masks.  The block consumes 15 noisy copies
  through measure-and-correct gadgets, decodes, and post-selects on all 14
  check outcomes being zero.  The surviving single-error patterns are the
  35 weight-3 codewords of the associated Hamming code, so the accepted
  output error is ~35·eps³ — cubic suppression per round.  Everything in
  the block is a (classically controlled) Clifford or a Z-basis
  measurement, which is exactly the gate set the evaluation protocol can
  execute on authenticated wires.
- **Cut-and-choose testing** (:func:`create_magic_states`): the preparing
  player encodes ``(t+k)·n`` copies; every other player is dealt ``n``
  random copies to decode and measure in the magic basis, aborting on any
  flipped outcome.  A preparer who corrupts ``c`` copies escapes with
  probability hypergeometric in ``c`` — and the survivors then feed the
  distillation stage, so even escapees must survive the block checks.
- **Diagnostics** (:func:`lw_weight`, :func:`sampling_bound_check`,
  :func:`exact_block_error`): low-weight subspace mass, the
  sample-and-test tail bound, and exact enumeration of the block's
  accept/error probabilities for calibrating the Monte Carlo runs.

Quality claims hold below :data:`DISTILL_THRESHOLD`, the fixed-point
threshold of the block's error map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    InvalidDimensionError,
    InvalidOperatorError,
    ResourceLimitError,
)
from .gf2 import BitMatrix
from .pauli_clifford import GATE_UNITARIES, inverse
from .backend import (
    AuthWire,
    DenseState,
    measure_T_basis,
    measure_z,
    prepare,
)
from .mpc import erase_key, read_key, store_key

__all__ = [
    "BLOCK_SIZE",
    "BLOCK_CHECKS",
    "DISTILL_THRESHOLD",
    "NoisyTEnsemble",
    "block_syndrome",
    "block_parity",
    "block_accepts",
    "block_classical",
    "encoder_matrix",
    "gl_to_cnots",
    "block_cnots",
    "bk_block_gates",
    "bk_distill_block",
    "dephase_T",
    "distill_circuit",
    "exact_block_error",
    "sample_block_error",
    "lw_weight",
    "sampling_bound_check",
    "create_magic_states",
]


BLOCK_SIZE = 15

#: Parity checks of the distillation block: check ``r`` covers the qubits
#: whose 1-based label has bit ``r`` set.  Each has weight 8, and together
#: they cut the 2^15 patterns down to 2^11 accepted ones, of which the 35
#: weight-3 survivors dominate the output error.
BLOCK_CHECKS: tuple[int, ...] = tuple(
    sum(1 << (j - 1) for j in range(1, BLOCK_SIZE + 1) if (j >> r) & 1)
    for r in range(4)
)

#: Quality claims require the input flip rate below this fixed-point
#: threshold of the block's error map.
DISTILL_THRESHOLD = 0.5 * (1.0 - math.sqrt(3.0 / 7.0))

# Register layout of one block: slot 14 carries the distilled output, and
# slots (0, 1, 3, 7) are the seeds that read out the four parity checks
# after decoding.  (Labels 15 and 1,2,4,8 in the 1-based check convention.)
_OUTPUT_SLOT = 14
_X_SEED_SLOTS = (0, 1, 3, 7)
_SEED_SLOTS = (_OUTPUT_SLOT,) + _X_SEED_SLOTS


# ---------------------------------------------------------------------------
# Classical view of the block: syndrome and parity of a flip pattern
# ---------------------------------------------------------------------------


def block_syndrome(pattern: int) -> int:
    """Syndrome of a basis-flip pattern; bit ``r`` is check ``r``'s parity."""
    return sum(
        ((pattern & h).bit_count() & 1) << r for r, h in enumerate(BLOCK_CHECKS)
    )


def block_parity(pattern: int) -> int:
    """Overall parity of a flip pattern = the distilled output's flip bit."""
    return pattern.bit_count() & 1


def block_accepts(pattern: int) -> bool:
    """True iff the pattern passes all four checks (trivial syndrome)."""
    return block_syndrome(pattern) == 0


def block_classical(pattern: int) -> tuple[bool, int]:
    """Fast path for basis-flip inputs: (accept flag, output flip bit).

    Because the block is built from CNOTs, classically controlled phase
    corrections and Z measurements, a magic-basis flip pattern propagates
    linearly: the check outcomes read exactly :func:`block_syndrome` and an
    accepted pattern flips the output iff its parity is odd.  The dense
    route reproduces this bit-for-bit (tested over every pattern of weight
    up to 3).
    """
    return block_syndrome(pattern) == 0, block_parity(pattern)


# ---------------------------------------------------------------------------
# The block circuit: encoder, gate program, dense execution
# ---------------------------------------------------------------------------


_ENCODER = None
_BLOCK_CNOTS = None


def encoder_matrix() -> BitMatrix:
    """Invertible GF(2) map sending seed basis states onto the code.

    Column ``_OUTPUT_SLOT`` is all-ones (the logical support), the four
    X-seed columns are the check masks, and every other column is an
    identity column.  Conjugating the all-|0> preparation plus seed
    Hadamards by this map prepares the encoded logical-plus state.
    """
    global _ENCODER
    if _ENCODER is None:
        cols = [1 << j for j in range(BLOCK_SIZE)]
        cols[_OUTPUT_SLOT] = (1 << BLOCK_SIZE) - 1
        for r, s in enumerate(_X_SEED_SLOTS):
            cols[s] = BLOCK_CHECKS[r]
        rows = tuple(
            sum(((cols[j] >> i) & 1) << j for j in range(BLOCK_SIZE))
            for i in range(BLOCK_SIZE)
        )
        _ENCODER = BitMatrix(rows, BLOCK_SIZE)
    return _ENCODER


def gl_to_cnots(mat: BitMatrix) -> tuple:
    """CNOT schedule realizing a basis permutation ``|x> -> |mat x>``.

    Returns ``(control, target)`` pairs in application order: executing
    ``x[target] ^= x[control]`` sequentially over the list computes
    ``mat @ x``.  Gaussian elimination collects row operations reducing
    ``mat`` to the identity; the schedule is that list reversed, because
    the first gate applied is the innermost factor of the product.

    Raises:
        InvalidOperatorError: if ``mat`` is singular.
    """
    m = mat.ncols
    rows = list(mat.rows)
    ops: list[tuple[int, int]] = []
    for c in range(m):
        if not (rows[c] >> c) & 1:
            for r in range(c + 1, m):
                if (rows[r] >> c) & 1:
                    rows[c] ^= rows[r]
                    ops.append((r, c))
                    break
            else:
                raise InvalidOperatorError("matrix is singular over GF(2)")
        for r in range(m):
            if r != c and (rows[r] >> c) & 1:
                rows[r] ^= rows[c]
                ops.append((c, r))
    return tuple(reversed(ops))


def block_cnots() -> tuple:
    """The encoder's CNOT schedule (cached)."""
    global _BLOCK_CNOTS
    if _BLOCK_CNOTS is None:
        _BLOCK_CNOTS = gl_to_cnots(encoder_matrix())
    return _BLOCK_CNOTS


def bk_block_gates() -> tuple:
    """The block as a structural gate program (single source of truth).

    Op kinds:
        ``("prep", qid)`` — fresh work qubit in |0>.
        ``("input", slot, qid)`` — the ``slot``-th noisy copy enters here.
        ``("clifford", name, qids)`` — fixed Clifford gate.
        ``("cc_clifford", name, qids, label)`` — Clifford applied iff the
            recorded measurement ``label`` came out 1.
        ``("measure_z", qid, label)`` — destructive Z measurement.

    Everything the block *does* is a (classically controlled) Clifford or a
    Z measurement — the gate census tests assert exactly that, and it is
    what makes the block runnable on authenticated wires.
    """
    ops: list[tuple] = []
    for q in range(BLOCK_SIZE):
        ops.append(("prep", ("code", q)))
    for s in _SEED_SLOTS:
        ops.append(("clifford", "H", (("code", s),)))
    cnots = block_cnots()
    for c, t in cnots:
        ops.append(("clifford", "CNOT", (("code", c), ("code", t))))
    # Consume one noisy copy per code qubit: entangle, measure, correct.
    for i in range(BLOCK_SIZE):
        ops.append(("input", i, ("anc", i)))
        ops.append(("clifford", "CNOT", (("code", i), ("anc", i))))
        ops.append(("measure_z", ("anc", i), f"g{i}"))
        ops.append(("cc_clifford", "S", (("code", i),), f"g{i}"))
    for c, t in reversed(cnots):
        ops.append(("clifford", "CNOT", (("code", c), ("code", t))))
    for s in _X_SEED_SLOTS:
        ops.append(("clifford", "H", (("code", s),)))
    for q in range(BLOCK_SIZE):
        if q != _OUTPUT_SLOT:
            ops.append(("measure_z", ("code", q), f"c{q}"))
    # Deterministic final frame fix: the gadget chain leaves the conjugate
    # magic state, one phase gate returns it.
    ops.append(("clifford", "S", (("code", _OUTPUT_SLOT),)))
    return tuple(ops)


def _input_state(spec, qid) -> DenseState:
    if isinstance(spec, np.ndarray):
        return prepare("amplitudes", amplitudes=spec, ids=(qid,))
    st = prepare("magic_T", ids=(qid,))
    if int(spec) & 1:
        st.apply_gate("Z", (qid,))
    return st


def bk_distill_block(inputs, rng) -> dict:
    """Runs one 15-to-1 block densely and post-selects on the checks.

    Args:
        inputs: 15 copies; each entry is a flip bit (0 = clean magic state,
            1 = orthogonal) or an explicit 2-amplitude vector.
        rng: numpy Generator.

    Returns:
        dict with ``accept`` (all 14 check outcomes zero), ``syndrome``
        (the four decoded check bits), ``checks`` (all 14 outcomes keyed by
        code slot), ``gadget_bits`` (the 15 consumption outcomes) and
        ``state`` (the single-qubit dense output, kept even on reject so
        callers can inspect what a sloppy post-selection would have used).

    The working register peaks at 16 qubits: each copy is consumed and
    measured away before the next one enters.
    """
    if len(inputs) != BLOCK_SIZE:
        raise InvalidDimensionError(
            f"block takes {BLOCK_SIZE} copies, got {len(inputs)}"
        )
    state = prepare("zero", 0, backend="dense", ids=())
    bits: dict[str, int] = {}
    for op in bk_block_gates():
        kind = op[0]
        if kind == "prep":
            state.append_zeros((op[1],))
        elif kind == "input":
            state.append_state(_input_state(inputs[op[1]], op[2]))
        elif kind == "clifford":
            state.apply_gate(op[1], op[2])
        elif kind == "cc_clifford":
            if bits[op[3]]:
                state.apply_gate(op[1], op[2])
        else:  # measure_z
            bits[op[2]] = state.measure_remove(op[1], rng)[0]
    checks = {q: bits[f"c{q}"] for q in range(BLOCK_SIZE) if q != _OUTPUT_SLOT}
    syndrome = sum(checks[s] << r for r, s in enumerate(_X_SEED_SLOTS))
    return {
        "accept": not any(checks.values()),
        "syndrome": syndrome,
        "checks": checks,
        "gadget_bits": [bits[f"g{i}"] for i in range(BLOCK_SIZE)],
        "state": state,
    }


# ---------------------------------------------------------------------------
# Dephasing twirl
# ---------------------------------------------------------------------------


_ZHAT = GATE_UNITARIES["S"] @ GATE_UNITARIES["X"]


def dephase_T(state: DenseState, qubit_ids, rng, bits=None) -> int:
    """Applies the magic-basis dephasing twirl to the listed qubits.

    Each qubit receives ``Ẑ = S·X`` with independent probability 1/2 (or
    per the explicit ``bits`` when given).  ``Ẑ`` fixes both magic-basis
    states up to phase, so averaging over the coin kills the off-diagonal
    terms of the density matrix in that basis: arbitrary single-qubit
    deviations collapse to classical basis flips.

    Returns the mask of qubits that actually received the twirl.
    """
    if not isinstance(state, DenseState):
        raise InvalidOperatorError("the dephasing twirl requires a dense state")
    mask = 0
    for i, q in enumerate(qubit_ids):
        b = int(bits[i]) if bits is not None else int(rng.integers(0, 2))
        if b & 1:
            state.apply_gate("X", (q,))
            state.apply_gate("S", (q,))
            mask |= 1 << i
    return mask


def _twirl_spec(spec, rng):
    """Twirl one input description; flip bits are already diagonal."""
    if isinstance(spec, np.ndarray) and int(rng.integers(0, 2)):
        return _ZHAT @ np.asarray(spec, dtype=complex)
    if not isinstance(spec, np.ndarray):
        rng.integers(0, 2)  # keep the coin stream aligned across routes
    return spec


# ---------------------------------------------------------------------------
# Full distillation pass: twirl, permute, blocks
# ---------------------------------------------------------------------------


def distill_circuit(
    inputs,
    t: int,
    rng,
    route: str = "dense",
    resupply=None,
    max_retries: int = 64,
) -> dict:
    """Distills ``len(inputs)`` noisy copies down to ``t`` outputs.

    Pipeline: dephasing twirl on every copy, a uniform random permutation,
    then one 15-to-1 block per output.  ``len(inputs)`` must equal
    ``15·t``.

    Args:
        inputs: copy descriptions — flip bits, or 2-amplitude vectors on
            the dense route.
        t: number of blocks / outputs.
        rng: numpy Generator.
        route: ``"dense"`` executes each block on a state vector;
            ``"classical"`` uses the exact flip-bit reduction (valid
            because the twirl makes deviations diagonal; bit inputs only).
        resupply: optional ``resupply(rng) -> 15 fresh copies``; when
            given, a rejected block is retried with fresh copies instead
            of being reported rejected.
        max_retries: retry budget per block.

    Returns:
        dict with ``outputs`` (one record per block: ``accept``, ``route``,
        ``retries``, plus ``state`` densely or ``t_error`` classically),
        ``permutation`` and ``accept_all``.
    """
    m = len(inputs)
    if t < 1 or m != BLOCK_SIZE * t:
        raise InvalidDimensionError(
            f"{m} copies cannot form {t} blocks of {BLOCK_SIZE}"
        )
    if route not in ("dense", "classical"):
        raise ConfigError(f"unknown distillation route {route!r}")
    if route == "classical":
        for s in inputs:
            if isinstance(s, np.ndarray):
                raise ConfigError(
                    "the classical route takes basis-flip bits, not amplitudes"
                )
    twirled = [_twirl_spec(s, rng) for s in inputs]
    perm = [int(x) for x in rng.permutation(m)]
    shuffled = [twirled[i] for i in perm]

    outputs = []
    for b in range(t):
        block = shuffled[b * BLOCK_SIZE : (b + 1) * BLOCK_SIZE]
        retries = 0
        while True:
            rec = _run_one_block(block, rng, route)
            if rec["accept"] or resupply is None or retries >= max_retries:
                break
            block = [_twirl_spec(s, rng) for s in resupply(rng)]
            if len(block) != BLOCK_SIZE:
                raise InvalidDimensionError(
                    f"resupply must return {BLOCK_SIZE} copies"
                )
            retries += 1
        rec["retries"] = retries
        outputs.append(rec)
    return {
        "outputs": outputs,
        "permutation": perm,
        "accept_all": all(r["accept"] for r in outputs),
    }


def _run_one_block(block, rng, route: str) -> dict:
    if route == "dense":
        rec = bk_distill_block(block, rng)
        return {
            "route": "dense",
            "accept": rec["accept"],
            "syndrome": rec["syndrome"],
            "state": rec["state"],
            "t_error": None,
        }
    pattern = 0
    for j, s in enumerate(block):
        pattern |= (int(s) & 1) << j
    accept, err = block_classical(pattern)
    return {
        "route": "classical",
        "accept": accept,
        "syndrome": block_syndrome(pattern),
        "state": None,
        "t_error": err,
    }


# ---------------------------------------------------------------------------
# Noise model and exact block statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoisyTEnsemble:
    """I.i.d. magic-state source: each copy flipped with probability eps."""

    eps: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eps < 1.0:
            raise ConfigError(f"flip rate must lie in [0, 1), got {self.eps}")

    def below_threshold(self) -> bool:
        return self.eps < DISTILL_THRESHOLD

    def sample_bits(self, count: int, rng) -> list[int]:
        return [int(b) for b in rng.random(count) < self.eps]


_ACCEPT_STATS = None


def _accepted_stats() -> dict:
    """Weight/parity histogram of all flip patterns with trivial syndrome."""
    global _ACCEPT_STATS
    if _ACCEPT_STATS is None:
        hist: dict[tuple[int, int], int] = {}
        for e in range(1 << BLOCK_SIZE):
            if block_syndrome(e) == 0:
                key = (e.bit_count(), e.bit_count() & 1)
                hist[key] = hist.get(key, 0) + 1
        _ACCEPT_STATS = hist
    return _ACCEPT_STATS


def exact_block_error(eps: float) -> dict:
    """Exact accept probability and post-selected output error at rate eps.

    Enumerates the 2^15 flip patterns once (cached as a weight/parity
    histogram of the 2^11 accepted ones) and sums the i.i.d. probabilities.
    This is the calibration oracle the Monte Carlo tests compare against.
    """
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"flip rate must lie in [0, 1), got {eps}")
    accept = 0.0
    err = 0.0
    for (w, par), cnt in _accepted_stats().items():
        p = cnt * (eps ** w) * ((1.0 - eps) ** (BLOCK_SIZE - w))
        accept += p
        if par:
            err += p
    return {
        "eps": eps,
        "accept_probability": accept,
        "output_error": err / accept if accept > 0 else 0.0,
    }


def sample_block_error(eps: float, trials: int, rng) -> dict:
    """Vectorized Monte Carlo of the classical block at flip rate eps."""
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"flip rate must lie in [0, 1), got {eps}")
    bits = (rng.random((trials, BLOCK_SIZE)) < eps).astype(np.uint8)
    ok = np.ones(trials, dtype=bool)
    for h in BLOCK_CHECKS:
        cols = [j for j in range(BLOCK_SIZE) if (h >> j) & 1]
        ok &= (bits[:, cols].sum(axis=1) & 1) == 0
    accepted = int(ok.sum())
    errors = int((bits[ok].sum(axis=1) & 1).sum())
    return {
        "eps": eps,
        "trials": trials,
        "accepted": accepted,
        "errors": errors,
        "accept_rate": accepted / trials if trials else 0.0,
        "output_error_rate": errors / accepted if accepted else 0.0,
    }


# ---------------------------------------------------------------------------
# Low-weight diagnostics
# ---------------------------------------------------------------------------


_T_BASIS = GATE_UNITARIES["T"] @ GATE_UNITARIES["H"]


def lw_weight(state: DenseState, ell_cut: int, qubit_ids=None) -> float:
    """Mass of the state on magic-basis strings of Hamming weight <= cut.

    Rotates (a copy of) each listed qubit into the magic basis and sums the
    probabilities of all computational strings whose listed bits have at
    most ``ell_cut`` ones.  ``qubit_ids=None`` means every qubit.
    """
    if not isinstance(state, DenseState):
        raise InvalidOperatorError("low-weight mass requires a dense state")
    qs = list(qubit_ids) if qubit_ids is not None else list(state.ids)
    if len(qs) > 12:
        raise ResourceLimitError(
            f"low-weight projector limited to 12 qubits, got {len(qs)}"
        )
    work = state.copy()
    vdag = _T_BASIS.conj().T
    for q in qs:
        work.apply_unitary_matrix(vdag, (q,))
    probs = np.abs(work.vec) ** 2
    idx = np.arange(probs.size)
    weights = np.zeros(probs.size, dtype=np.int64)
    for q in qs:
        col = work._col(q)
        weights += (idx >> (work.m - 1 - col)) & 1
    return float(probs[weights <= ell_cut].sum())


def sampling_bound_check(
    m: int, k_tested: int, planted: int, delta: float, trials: int, rng
) -> dict:
    """Random-subset testing versus the exponential leftover-weight bound.

    Each trial plants ``planted`` flipped copies at random among ``m``,
    measures ``k_tested`` random positions in the magic basis, and keeps
    only all-clean trials.  A kept trial *violates* the quality claim when
    the leftover state's mass beyond relative weight ``delta`` exceeds 1/2
    (for planted basis states the leftover weight is deterministic, so the
    tail mass is 0 or 1).  The reported reference is the exponential shape
    ``2^(-delta²·k)``.

    Returns pass/violation rates, the exact pass probability (a ratio of
    binomial coefficients), and the mean leftover tail mass among kept
    trials.
    """
    if not 1 <= m <= 12:
        raise ResourceLimitError(f"subset check limited to 12 qubits, got {m}")
    if not 0 <= k_tested < m:
        raise InvalidDimensionError(
            f"tested count {k_tested} must lie in [0, {m - 1}]"
        )
    if not 0 <= planted <= m:
        raise InvalidDimensionError(f"planted count {planted} outside [0, {m}]")
    cut = int(math.floor(delta * (m - k_tested)))
    passes = 0
    violations = 0
    tail_sum = 0.0
    for _ in range(trials):
        flipped = {int(x) for x in rng.permutation(m)[:planted]}
        state = prepare("zero", 0, backend="dense", ids=())
        for q in range(m):
            state.append_state(prepare("magic_T", ids=(q,)))
            if q in flipped:
                state.apply_gate("Z", (q,))
        tested = [int(x) for x in rng.permutation(m)[:k_tested]]
        clean = True
        for q in tested:
            outcome = measure_T_basis(state, q, rng)
            state.measure_remove(q, rng)
            if outcome:
                clean = False
                break
        if not clean:
            continue
        passes += 1
        tail = 1.0 - lw_weight(state, cut)
        tail_sum += tail
        if tail > 0.5:
            violations += 1
    exact_pass = (
        math.comb(m - planted, k_tested) / math.comb(m, k_tested)
        if k_tested <= m - planted
        else 0.0
    )
    return {
        "m": m,
        "k_tested": k_tested,
        "planted": planted,
        "delta": delta,
        "trials": trials,
        "pass_rate": passes / trials if trials else 0.0,
        "exact_pass_probability": exact_pass,
        "violation_rate": violations / trials if trials else 0.0,
        "conditional_tail": tail_sum / passes if passes else 0.0,
        "bound": 2.0 ** (-(delta ** 2) * k_tested),
    }


# ---------------------------------------------------------------------------
# Protocol stage: cut-and-choose supply of authenticated magic wires
# ---------------------------------------------------------------------------


def _tested_outcome(session, rec) -> int:
    """The magic-basis bit a tester obtains from one decoded copy.

    Authentication failure is folded into the report as a flipped outcome —
    either way the verification call aborts on a nonzero bit.
    """
    if session.physical:
        ids = session._phys_ids(rec.wire)
        session.state.apply_clifford(inverse(rec.auth.key), ids)
        traps = measure_z(session.state, ids[1:], session.rng)
        outcome = measure_T_basis(session.state, ids[0], session.rng)
        session.state.measure_remove(ids[0], session.rng)
        return 1 if any(traps) else outcome
    if not rec.auth.accepts_on_decode():
        return 1
    residual = rec.auth.logical_residual()
    if residual.x & 1:
        # A basis-misaligned residual dephases to a fair coin in this basis.
        return int(session.rng.integers(0, 2))
    return (rec.magic_bit ^ residual.z) & 1


def _consumed_bit(session, rec) -> tuple[bool, int]:
    """Flip bit contributed by one survivor entering a distillation block."""
    if not rec.auth.accepts_on_decode():
        return False, 0
    residual = rec.auth.logical_residual()
    if residual.x & 1:
        return True, int(session.rng.integers(0, 2))
    return True, (rec.magic_bit ^ residual.z) & 1


def create_magic_states(session, t: int) -> list:
    """Produces ``t`` tested-and-distilled magic wires inside a session.

    Stages:
      1. Player 1 submits ``(t+k)·n`` magic-basis copies (a corrupted
         preparer flips the scripted batch indices) and the whole batch is
         encoded in one circulation phase.
      2. The trusted computation deals each player ``2..k`` a random
         disjoint set of ``n`` copies; one parallel round delivers them.
         Each tester decodes and measures in the magic basis (a corrupted
         tester may lie via ``test_lies[("magic", wire)]``); any nonzero
         reported bit aborts the run.
      3. The ``(t+1)·n`` untested survivors feed 15-to-1 distillation when
         they suffice (symbolic backends); each block's checks are verified
         through the trusted computation and any nonzero syndrome aborts.
         With too few survivors — always the case on the dense backend,
         whose register budget caps the batch — the first ``t`` survivors
         are returned directly and the transcript notes the shortcut.

    Returns the ``t`` output wires, or ``[]`` after an abort.  Block
    consumption is accounted as ``k`` rounds per CNOT of the encoder,
    decoder and gadget schedule.
    """
    if t < 1:
        raise ConfigError(f"need at least one magic output, got t={t}")
    if session.aborted:
        return []
    k, n = session.k, session.n
    ell = (t + k) * n
    serial = session._magic_serial
    session._magic_serial += ell
    names = [("magic", serial + i) for i in range(ell)]
    corrupt = session.adversary.magic_corruptions
    for i, w in enumerate(names):
        session.add_magic_wire(w, t_error=1 if i in corrupt else 0)
    if not session.encode_all(names):
        return []

    deal = [int(x) for x in session.rng.permutation(ell)]
    tested_of = {
        p: [deal[(p - 2) * n + j] for j in range(n)] for p in range(2, k + 1)
    }
    survivors = [names[i] for i in deal[(k - 1) * n :]]

    def setup(memory, inputs):
        for idxs in tested_of.values():
            for i in idxs:
                read_key(session.mpc, names[i])  # must still be live

        def update():
            for idxs in tested_of.values():
                for i in idxs:
                    erase_key(session.mpc, names[i])

        return {
            p: {"test_wires": [names[i] for i in tested_of.get(p, [])]}
            for p in range(1, k + 1)
        }, update

    if not session._invoke("magic:test-setup", setup):
        return []
    session.transcript.transit(
        1, None, "magic", {"tested": (k - 1) * n, "batch": ell}
    )

    reports = {}
    for p in range(2, k + 1):
        for i in tested_of[p]:
            w = names[i]
            rec = session.wires[w]
            outcome = _tested_outcome(session, rec)
            lie = session.adversary.test_lie("magic", w) & 1
            reports[w] = outcome ^ lie
            rec.status = "measured"

    def verify(memory, inputs):
        return {p: dict(reports) for p in range(1, k + 1)}, None

    if not session._invoke("magic:verify", verify, player_inputs=reports):
        return []
    if any(reports.values()):
        bad = sorted(str(w) for w, b in reports.items() if b)
        session.abort(f"magic-reject:{','.join(bad)}")
        return []
    session.transcript.note(
        "magic-tested", batch=ell, tested=(k - 1) * n, survivors=len(survivors)
    )

    needed = BLOCK_SIZE * t
    if len(survivors) >= needed and not session.physical:
        outputs = _distill_survivors(session, survivors, t)
        if session.aborted:
            return []
    else:
        outputs = survivors[:t]
        session.transcript.note(
            "magic-distill-fallback", survivors=len(survivors), needed=needed
        )

    if session.backend == "authwire":
        for w in outputs:
            rec = session.wires[w]
            session.state.append_state(prepare("magic_T", ids=(w,)))
            if rec.magic_bit:
                session.state.apply_gate("Z", (w,))
    return outputs


def _distill_survivors(session, survivors, t: int) -> list:
    """Runs the twirl-permute-block stage on encoded survivors.

    The twirl makes every copy's deviation a classical basis flip, so each
    block reduces exactly to its flip-bit algebra; the syndrome readouts
    are published through the trusted computation and any nonzero value
    aborts.  Each block output wire is re-keyed (its accumulated deviation
    was consumed into the published checks) and carries the block's parity
    as its new flip bit — which the accepted checks pin to the distilled
    quality.
    """
    k, n = session.k, session.n

    def stage_setup(memory, inputs):
        return {
            p: {"blocks": t, "block_size": BLOCK_SIZE}
            for p in range(1, k + 1)
        }, None

    if not session._invoke("magic:distill-setup", stage_setup):
        return []
    order = [int(x) for x in session.rng.permutation(len(survivors))]
    dephase_T_bits = session.rng.integers(0, 2, size=len(survivors))
    session.transcript.note(
        "magic-distill", blocks=t, twirled=int(dephase_T_bits.sum())
    )
    rounds_per_block = k * (2 * len(block_cnots()) + BLOCK_SIZE)

    outputs = []
    consumed = []
    syndromes = {}
    parities = {}
    for b in range(t):
        wires_b = [survivors[order[b * BLOCK_SIZE + j]] for j in range(BLOCK_SIZE)]
        pattern = 0
        for j, w in enumerate(wires_b):
            ok, bit = _consumed_bit(session, session.wires[w])
            if not ok:
                session.abort(f"magic-distill-auth:{w}")
                return []
            pattern |= bit << j
        session.transcript.bulk_rounds(
            "magic-distill", rounds_per_block, block=b
        )
        syndromes[b] = block_syndrome(pattern)
        parities[b] = block_parity(pattern)
        keep = wires_b[_OUTPUT_SLOT]
        outputs.append(keep)
        consumed.extend(w for w in wires_b if w is not keep)

    def check(memory, inputs):
        def update():
            for w in consumed:
                erase_key(session.mpc, w)
            for b, keep in enumerate(outputs):
                rec = session.wires[keep]
                rec.auth = AuthWire(wire_id=keep, n=n)
                rec.magic_bit = parities[b]
                store_key(session.mpc, keep, rec.auth)

        return {p: dict(syndromes) for p in range(1, k + 1)}, update

    if not session._invoke("magic:distill-verify", check, player_inputs=syndromes):
        return []
    if any(syndromes.values()):
        bad = ",".join(str(b) for b, s in sorted(syndromes.items()) if s)
        session.abort(f"magic-distill-reject:block{bad}")
        return []
    for w in consumed:
        session.wires[w].status = "measured"
    return outputs
