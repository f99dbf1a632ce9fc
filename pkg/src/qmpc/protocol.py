"""Distributed execution engine for authenticated multi-party computing.

``k`` players jointly evaluate a Clifford+T circuit on private inputs with
the help of a single classical trusted computation (the ``mpc`` module).
Every logical wire travels as a Clifford-authenticated ciphertext: one data
qubit plus ``n`` trap qubits under a secret Clifford key held by the trusted
computation.  The engine implements the wire subprotocols:

* ``encode_all`` -- each input/ancilla qubit is padded with ``2n`` fresh
  ancillas and circulated once around the ring; every player twirls it with
  a private random Clifford; the trusted computation then undoes the twirl,
  applies a secret random GF(2) linear map across the trap block, keeps
  ``n`` traps under a fresh key and measures the other ``n`` against a
  one-time pad.  Tampering in transit scrambles onto the measured traps.
* ``apply_single_clifford`` -- purely classical key update; the ciphertext
  never moves.
* ``apply_cnot`` -- the two ciphertexts (plus fresh traps) circulate jointly,
  the trusted computation decodes-applies-reencodes in one hidden Clifford,
  and both halves pass a fresh linear-map trap test before use.
* ``measure_wire`` -- the key is replaced by a map that fans the data bit
  onto the traps at secret positions, so a lying player must guess those
  positions to forge an outcome.
* ``decode_wire`` -- the key is released, the owner undoes it and checks
  the traps locally.
* ``t_gadget`` / ``run_mpqc`` -- non-Clifford gates via teleportation from
  authenticated magic wires (produced in the ``distill`` module).

Three execution backends share the orchestration layer:

* ``"tableau"``   -- logical stabilizer state + symbolic authentication
  (keys sampled lazily, attacks folded algebraically).  Fast path.
* ``"authwire"``  -- logical dense state + symbolic authentication; needed
  for T gates and magic wires.
* ``"dense"``     -- fully physical statevector execution: every twirl,
  key and pad is sampled and applied to real qubits.  Validation oracle
  for the symbolic paths (small ``n`` and ``k`` only).

The module also provides the reference functionalities an ideal-world run
would use (``ideal_functionality``, ``simulate_plain``), the attack-filter
simulators that stand in for the real tests in the ideal world, and a
``distinguishing_advantage`` estimator comparing real and ideal runs under
scripted Pauli adversaries.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .backend import (
    AuthWire,
    DenseState,
    authwire_apply_attack,
    measure_z,
    prepare,
)
from .errors import (
    ConfigError,
    InvalidDimensionError,
    PartitionViolationError,
    ProtocolViolationError,
)
from .gf2 import BitMatrix, BitVec, GLElement, random_invertible
from .mpc import (
    MPCState,
    erase_key,
    invoke,
    read_bit,
    read_key,
    reject_wire,
    store_bit,
    store_key,
)
from .pauli_clifford import (
    CliffordOp,
    PauliOp,
    clifford_from_gates,
    compose,
    conjugate_pauli,
    conjugate_pauli_on,
    gate_clifford,
    inverse,
    random_clifford,
    tensor,
)

__all__ = [
    "CLIFF_GATES",
    "Gate",
    "CircuitIR",
    "parse_circuit",
    "validate_circuit",
    "Transcript",
    "account",
    "AdversaryScript",
    "WireRecord",
    "Session",
    "simulate_plain",
    "ideal_functionality",
    "simulate_encode_adversary",
    "simulate_cnot_adversary",
    "simulate_measure_adversary",
    "distinguishing_advantage",
    "measurement_lie_deviation",
]

CLIFF_GATES = ("H", "S", "SDG", "X", "Y", "Z")

# Adversary injection slot used for the window between the final re-encoding
# unitary and the trap readout of a test.
POST = "post"


# ---------------------------------------------------------------------------
# Circuit intermediate representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    """One circuit operation.

    Attributes:
        kind: ``"cliff"``, ``"cnot"``, ``"meas"`` or ``"t"``.
        wires: Wire names the gate touches (control first for ``cnot``).
        name: Single-qubit Clifford gate name (``kind == "cliff"``).
        ctrl: Measurement label classically controlling the gate, or None.
        label: Result label (``kind == "meas"``).
        line: 1-based source line, 0 if synthetic.
    """

    kind: str
    wires: tuple[str, ...]
    name: str | None = None
    ctrl: str | None = None
    label: str | None = None
    line: int = 0


@dataclass(frozen=True)
class CircuitIR:
    """A parsed circuit over named wires with a player partition.

    Attributes:
        k: Number of players.
        input_of: wire -> submitting player, or None for a fresh ancilla.
        output_of: wire -> receiving player, or None if discarded.
        gates: Operations in order.
    """

    k: int
    input_of: dict[str, int | None]
    output_of: dict[str, int | None]
    gates: tuple[Gate, ...]

    @property
    def wires(self) -> tuple[str, ...]:
        return tuple(self.input_of)

    @property
    def t_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "t")


def _fail(exc_type, line_no: int, message: str):
    raise exc_type(f"line {line_no}: {message}")


def parse_circuit(text: str) -> CircuitIR:
    """Parses the plain-text circuit format.

    Grammar (one directive per line, ``#`` starts a comment)::

        PLAYERS <k>
        WIRE <name> IN <player>      | WIRE <name> ANCILLA
        WIRE <name> OUT <player>     | WIRE <name> DISCARD
        CLIFF <gate> <wire> [ctrl=<label>]
        CNOT <control> <target> [ctrl=<label>]
        MEAS <wire> -> <label>
        T <wire>

    Every wire needs exactly one input-side declaration (IN/ANCILLA) and one
    output-side declaration (OUT/DISCARD).  Raises ConfigError on syntax
    problems, PartitionViolationError on declaration problems, and
    ProtocolViolationError on ill-formed gate sequences; all with line
    numbers.
    """
    k: int | None = None
    input_of: dict[str, int] = {}
    output_of: dict[str, int] = {}
    decl_line: dict[str, int] = {}
    gates: list[Gate] = []
    labels: set[str] = set()
    measured: set[str] = set()

    def parse_player(tok: str, line_no: int) -> int:
        try:
            p = int(tok)
        except ValueError:
            _fail(ConfigError, line_no, f"player index {tok!r} is not an integer")
        if k is None or not 1 <= p <= k:
            _fail(
                PartitionViolationError,
                line_no,
                f"player index {p} outside 1..{k}",
            )
        return p

    def split_ctrl(toks: list[str], line_no: int) -> tuple[list[str], str | None]:
        if toks and toks[-1].startswith("ctrl="):
            label = toks[-1][5:]
            if not label:
                _fail(ConfigError, line_no, "empty ctrl= label")
            if label not in labels:
                _fail(
                    ProtocolViolationError,
                    line_no,
                    f"ctrl label {label!r} does not name an earlier MEAS",
                )
            return toks[:-1], label
        return toks, None

    def known_wire(name: str, line_no: int) -> str:
        if name not in input_of:
            _fail(ProtocolViolationError, line_no, f"undeclared wire {name!r}")
        if name in measured:
            _fail(
                ProtocolViolationError,
                line_no,
                f"wire {name!r} used after its measurement",
            )
        return name

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0].upper()

        if head == "PLAYERS":
            if k is not None:
                _fail(ConfigError, line_no, "duplicate PLAYERS directive")
            if len(toks) != 2:
                _fail(ConfigError, line_no, "usage: PLAYERS <k>")
            try:
                k = int(toks[1])
            except ValueError:
                _fail(ConfigError, line_no, f"player count {toks[1]!r} not an integer")
            if k < 2:
                _fail(PartitionViolationError, line_no, f"need >= 2 players, got {k}")
            continue

        if k is None:
            _fail(ConfigError, line_no, "PLAYERS directive must come first")

        if head == "WIRE":
            if len(toks) < 3:
                _fail(ConfigError, line_no, "usage: WIRE <name> <role> [player]")
            name, role = toks[1], toks[2].upper()
            if role in ("IN", "ANCILLA"):
                if name in input_of:
                    _fail(
                        PartitionViolationError,
                        line_no,
                        f"wire {name!r} already has an input-side declaration "
                        f"(line {decl_line[name]})",
                    )
                if role == "IN":
                    if len(toks) != 4:
                        _fail(ConfigError, line_no, "usage: WIRE <name> IN <player>")
                    input_of[name] = parse_player(toks[3], line_no)
                else:
                    if len(toks) != 3:
                        _fail(ConfigError, line_no, "usage: WIRE <name> ANCILLA")
                    input_of[name] = None
                decl_line[name] = line_no
            elif role in ("OUT", "DISCARD"):
                if name in output_of:
                    _fail(
                        PartitionViolationError,
                        line_no,
                        f"wire {name!r} already has an output-side declaration",
                    )
                if role == "OUT":
                    if len(toks) != 4:
                        _fail(ConfigError, line_no, "usage: WIRE <name> OUT <player>")
                    output_of[name] = parse_player(toks[3], line_no)
                else:
                    if len(toks) != 3:
                        _fail(ConfigError, line_no, "usage: WIRE <name> DISCARD")
                    output_of[name] = None
            else:
                _fail(ConfigError, line_no, f"unknown wire role {role!r}")
            continue

        if head == "CLIFF":
            body, ctrl = split_ctrl(toks[1:], line_no)
            if len(body) != 2:
                _fail(ConfigError, line_no, "usage: CLIFF <gate> <wire> [ctrl=..]")
            gate_name = body[0].upper()
            if gate_name not in CLIFF_GATES:
                _fail(ConfigError, line_no, f"unknown 1-qubit Clifford {gate_name!r}")
            w = known_wire(body[1], line_no)
            gates.append(Gate("cliff", (w,), name=gate_name, ctrl=ctrl, line=line_no))
            continue

        if head == "CNOT":
            body, ctrl = split_ctrl(toks[1:], line_no)
            if len(body) != 2:
                _fail(ConfigError, line_no, "usage: CNOT <control> <target> [ctrl=..]")
            wa = known_wire(body[0], line_no)
            wb = known_wire(body[1], line_no)
            if wa == wb:
                _fail(ProtocolViolationError, line_no, "CNOT needs two distinct wires")
            gates.append(Gate("cnot", (wa, wb), ctrl=ctrl, line=line_no))
            continue

        if head == "MEAS":
            if len(toks) != 4 or toks[2] != "->":
                _fail(ConfigError, line_no, "usage: MEAS <wire> -> <label>")
            w = known_wire(toks[1], line_no)
            label = toks[3]
            if label in labels:
                _fail(ProtocolViolationError, line_no, f"duplicate label {label!r}")
            labels.add(label)
            measured.add(w)
            gates.append(Gate("meas", (w,), label=label, line=line_no))
            continue

        if head == "T":
            if len(toks) != 2:
                _fail(ConfigError, line_no, "usage: T <wire>")
            w = known_wire(toks[1], line_no)
            gates.append(Gate("t", (w,), line=line_no))
            continue

        _fail(ConfigError, line_no, f"unknown directive {toks[0]!r}")

    if k is None:
        raise ConfigError("empty circuit: missing PLAYERS directive")
    ir = CircuitIR(k, dict(input_of), dict(output_of), tuple(gates))
    validate_circuit(ir)
    return ir


def validate_circuit(circuit: CircuitIR) -> None:
    """Checks partition consistency of a (possibly hand-built) CircuitIR."""
    if circuit.k < 2:
        raise PartitionViolationError(f"need >= 2 players, got {circuit.k}")
    for w in circuit.input_of:
        if w not in circuit.output_of:
            raise PartitionViolationError(
                f"wire {w!r} has no output-side declaration (OUT or DISCARD)"
            )
    for w in circuit.output_of:
        if w not in circuit.input_of:
            raise PartitionViolationError(
                f"wire {w!r} has no input-side declaration (IN or ANCILLA)"
            )
    measured = {g.wires[0] for g in circuit.gates if g.kind == "meas"}
    for w in measured:
        if circuit.output_of.get(w) is not None:
            raise PartitionViolationError(
                f"measured wire {w!r} must be declared DISCARD, not OUT"
            )
    for p in list(circuit.input_of.values()) + list(circuit.output_of.values()):
        if p is not None and not 1 <= p <= circuit.k:
            raise PartitionViolationError(f"player index {p} outside 1..{circuit.k}")


# ---------------------------------------------------------------------------
# Transcript: rounds and event accounting
# ---------------------------------------------------------------------------


@dataclass
class Transcript:
    """Ordered record of quantum transits, trusted-computation calls and
    protocol milestones.  One quantum round = one parallel layer of
    player-to-player qubit sends."""

    events: list = field(default_factory=list)
    quantum_rounds: int = 0

    def transit(self, sender, receiver, phase: str, payload=None) -> None:
        self.quantum_rounds += 1
        self.events.append(
            {
                "type": "transit",
                "round": self.quantum_rounds,
                "from": sender,
                "to": receiver,
                "phase": phase,
                "payload": payload,
            }
        )

    def note(self, kind: str, **details) -> None:
        self.events.append({"type": kind, **details})

    def bulk_rounds(self, phase: str, count: int, **details) -> None:
        """Accounts ``count`` quantum rounds as one aggregate event.

        Used for circulation-heavy subroutines (e.g. a distillation block's
        CNOT schedule) where logging every round individually would drown
        the transcript."""
        self.quantum_rounds += count
        self.events.append(
            {"type": "bulk-rounds", "phase": phase, "rounds": count, **details}
        )


def account(transcript: Transcript) -> dict:
    """Summarizes a transcript: total rounds, calls, per-phase breakdown."""
    by_phase: Counter = Counter()
    mpc_calls = 0
    for ev in transcript.events:
        if ev["type"] == "transit":
            by_phase[ev["phase"]] += 1
        elif ev["type"] == "bulk-rounds":
            by_phase[ev["phase"]] += ev["rounds"]
        elif ev["type"] == "mpc-call":
            mpc_calls += 1
    return {
        "quantum_rounds": transcript.quantum_rounds,
        "mpc_calls": mpc_calls,
        "rounds_by_phase": dict(by_phase),
        "events": len(transcript.events),
    }


# ---------------------------------------------------------------------------
# Adversary scripting
# ---------------------------------------------------------------------------


@dataclass
class AdversaryScript:
    """Scripted attack plan.  Empty dicts everywhere = honest run.

    Injection slots (all optional):
        transit_attacks: ``(phase, key, hop) -> PauliOp`` applied to the
            register in flight.  ``phase`` is ``"encode"`` (key = wire name,
            register ``2n+1``: data, kept traps, measured traps) or
            ``"cnot"`` (key = (control, target), register ``4n+2``).  Hop 0
            fires before the first twirl, hop ``h`` right after player
            ``h``'s twirl, hop ``POST`` between the re-encoding unitary and
            the trap readout.
        dense_attacks: same keys -> unitary ndarray; dense backend only.
        test_lies: ``(phase, wire) -> int`` XORed onto the trap readout the
            owner reports (n bits).
        measure_lies: ``wire -> int`` XORed onto the reported measurement
            string (n+1 bits, data bit = bit 0).
        prep_overrides: ``wire -> prep spec``; dense backend only — the
            corrupted owner physically submits this state instead of the
            honest one.
        magic_corruptions: batch indices (0-based) of magic-basis copies the
            preparing player submits flipped to the orthogonal state.  Works
            on every backend: the flip is tracked classically (and applied
            physically on the dense backend).
        mpc_abort: callback ``(tag, corrupted_view) -> {player: bit}``
            letting corrupted players abort any trusted-computation call
            after seeing their outputs.

    Magic-wire testers can also lie: ``test_lies`` keyed ``("magic", wire)``
    (a single bit) flips the T-basis outcome that tester reports.
    """

    transit_attacks: dict = field(default_factory=dict)
    dense_attacks: dict = field(default_factory=dict)
    test_lies: dict = field(default_factory=dict)
    measure_lies: dict = field(default_factory=dict)
    prep_overrides: dict = field(default_factory=dict)
    magic_corruptions: frozenset = frozenset()
    mpc_abort: object = None

    def transit_attack(self, phase: str, key, hop) -> PauliOp | None:
        return self.transit_attacks.get((phase, key, hop))

    def dense_attack(self, phase: str, key, hop) -> np.ndarray | None:
        return self.dense_attacks.get((phase, key, hop))

    def test_lie(self, phase: str, wire) -> int:
        return self.test_lies.get((phase, wire), 0)

    def measure_lie(self, wire) -> int:
        return self.measure_lies.get(wire, 0)

    def is_honest(self) -> bool:
        return not (
            self.transit_attacks
            or self.dense_attacks
            or self.test_lies
            or self.measure_lies
            or self.prep_overrides
            or self.magic_corruptions
            or self.mpc_abort
        )


# ---------------------------------------------------------------------------
# GF(2) linear-map helpers
# ---------------------------------------------------------------------------


def _gl_vec(mat: BitMatrix, bits: int) -> int:
    return mat.mat_vec(BitVec(bits, mat.ncols)).bits


def linear_map_clifford(g: GLElement) -> CliffordOp:
    """The Clifford permuting computational states by ``|x> -> |g x>``.

    Conjugation acts as ``X^a -> X^{g a}`` and ``Z^b -> Z^{(g^T)^{-1} b}``
    with no sign contributions.
    """
    m = g.m
    gt_inv = g.inverse_matrix.transpose()
    x_rows = [PauliOp(m, _gl_vec(g.matrix, 1 << j), 0, 0) for j in range(m)]
    z_rows = [PauliOp(m, 0, _gl_vec(gt_inv, 1 << j), 0) for j in range(m)]
    return CliffordOp(m, tuple(x_rows + z_rows))


def _circulation_test(
    qfold: PauliOp,
    n: int,
    lie: int,
    rng: np.random.Generator,
    mix_data: bool,
) -> tuple[bool, PauliOp]:
    """Applies the hidden-linear-map trap test to a folded Pauli deviation.

    ``qfold`` lives on the plaintext register ``[data, kept traps, readout
    traps]`` (``2n+1`` qubits).  A secret uniform invertible map ``g`` mixes
    the trap block (all ``2n+1`` qubits when ``mix_data`` — the fresh-
    ancilla variant where the data is a known |0>), the readout block is
    measured, and the owner's report (XORed with ``lie``) is compared to
    the one-time pad.

    Returns ``(accept, residual)`` with the residual on the surviving
    ``n+1``-qubit ciphertext ``[data, kept traps]``.  ``g`` is only sampled
    when the deviation actually touches the mixed block, so honest runs
    draw no randomness.
    """
    if mix_data:
        dim = 2 * n + 1
        xv, zv = qfold.x, qfold.z
        if xv == 0 and zv == 0:
            return lie == 0, PauliOp.identity(n + 1)
        g = random_invertible(dim, rng)
        gx = _gl_vec(g.matrix, xv)
        gz = _gl_vec(g.inverse_matrix.transpose(), zv)
        keep_mask = (1 << (n + 1)) - 1
        accept = ((gx >> (n + 1)) ^ lie) == 0
        return accept, PauliOp(n + 1, gx & keep_mask, gz & keep_mask, 0)

    x_data, z_data = qfold.x & 1, qfold.z & 1
    x_traps, z_traps = qfold.x >> 1, qfold.z >> 1
    if x_traps == 0 and z_traps == 0:
        residual = PauliOp(n + 1, x_data, z_data, 0)
        return lie == 0, residual
    g = random_invertible(2 * n, rng)
    gx = _gl_vec(g.matrix, x_traps)
    gz = _gl_vec(g.inverse_matrix.transpose(), z_traps)
    keep = (1 << n) - 1
    accept = ((gx >> n) ^ lie) == 0
    residual = PauliOp(
        n + 1, x_data | ((gx & keep) << 1), z_data | ((gz & keep) << 1), 0
    )
    return accept, residual


# ---------------------------------------------------------------------------
# Session: the k-player run
# ---------------------------------------------------------------------------


@dataclass
class WireRecord:
    """Tracks one logical wire through the protocol."""

    wire: object
    owner: int
    status: str = "pending"  # pending|encoded|measured|decoded|rejected
    auth: AuthWire | None = None
    ancilla: bool = False
    magic_bit: int | None = None  # T-basis flip of a magic wire, tracked classically


class Session:
    """One multi-party evaluation: k players, n traps per wire, one backend.

    Args:
        k: Player count (>= 2).
        n: Traps per authenticated wire (>= 1).
        rng: Seed or numpy Generator.
        backend: ``"tableau"`` | ``"authwire"`` | ``"dense"`` (see module
            docstring).
        corrupted: Corrupted player set (for trusted-computation delivery
            order and abort rights).
        adversary: AdversaryScript; None = honest.
    """

    def __init__(
        self,
        k: int,
        n: int,
        rng=None,
        backend: str = "tableau",
        corrupted: frozenset[int] | set[int] = frozenset(),
        adversary: AdversaryScript | None = None,
    ) -> None:
        if backend not in ("tableau", "authwire", "dense"):
            raise ConfigError(f"unknown backend {backend!r}")
        if n < 1:
            raise InvalidDimensionError(f"need at least one trap, got n={n}")
        self.k = k
        self.n = n
        self.backend = backend
        self.physical = backend == "dense"
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.adversary = adversary or AdversaryScript()
        self.transcript = Transcript()
        self.mpc = MPCState(
            k=k, corrupted=frozenset(corrupted), log=self.transcript.events
        )
        logical_backend = "tableau" if backend == "tableau" else "dense"
        self.state = prepare("zero", 0, backend=logical_backend, ids=())
        self.wires: dict[object, WireRecord] = {}
        self.aborted = False
        self.abort_reason: str | None = None
        self._gadget_count = 0
        self._magic_serial = 0

    # -- plumbing ----------------------------------------------------------

    def abort(self, reason: str) -> None:
        if not self.aborted:
            self.aborted = True
            self.abort_reason = reason
            self.transcript.note("abort", reason=reason)

    def _invoke(self, tag: str, compute, player_inputs=None) -> bool:
        """Runs one trusted-computation call; mirrors aborts into the session."""
        result = invoke(
            self.mpc,
            tag,
            compute,
            player_inputs=player_inputs,
            adversary=self.adversary.mpc_abort,
        )
        if not result.ok:
            self.abort(f"mpc:{tag}")
        return result.ok

    def _phys_ids(self, wire) -> tuple:
        return tuple(("q", wire, j) for j in range(self.n + 1))

    def _require_encoded(self, wire) -> WireRecord:
        rec = self.wires.get(wire)
        if rec is None:
            raise ProtocolViolationError(f"unknown wire {wire!r}")
        if rec.status != "encoded":
            raise ProtocolViolationError(
                f"wire {wire!r} is {rec.status}, expected encoded"
            )
        return rec

    # -- wire intake -------------------------------------------------------

    def add_wire(self, wire, owner: int | None, prep="zero") -> WireRecord:
        """Registers a wire holding a fresh plaintext qubit.

        ``owner=None`` marks a protocol ancilla: player 1 physically prepares
        it and the encoding test additionally pins the data qubit to |0>.
        """
        if wire in self.wires:
            raise ProtocolViolationError(f"duplicate wire {wire!r}")
        ancilla = owner is None
        holder = 1 if ancilla else owner
        if not 1 <= holder <= self.k:
            raise PartitionViolationError(f"owner {holder} outside 1..{self.k}")
        rec = WireRecord(wire=wire, owner=holder, ancilla=ancilla)
        self.wires[wire] = rec

        override = self.adversary.prep_overrides.get(wire)
        if override is not None and not self.physical:
            raise ProtocolViolationError(
                "physical preparation overrides need the dense backend; "
                "script a hop-0 Pauli attack instead"
            )
        effective = override if override is not None else prep
        if self.physical:
            self._prep_qubit(self.state, ("q", wire, 0), effective)
        else:
            self._prep_qubit(self.state, wire, effective)
        return rec

    def add_magic_wire(self, wire, t_error: int = 0) -> WireRecord:
        """Registers a magic-basis wire prepared by player 1.

        The copy is a T-basis eigenstate, so its deviation is one classical
        bit: ``t_error=1`` means the orthogonal state was submitted.  The bit
        lives in ``WireRecord.magic_bit``; a physical qubit exists only on
        the dense backend (elsewhere one is materialized on demand when a
        surviving wire is handed to a teleportation gadget).
        """
        if wire in self.wires:
            raise ProtocolViolationError(f"duplicate wire {wire!r}")
        rec = WireRecord(wire=wire, owner=1, magic_bit=t_error & 1)
        self.wires[wire] = rec
        if self.physical:
            qid = ("q", wire, 0)
            self.state.append_state(prepare("magic_T", ids=(qid,)))
            if t_error & 1:
                self.state.apply_gate("Z", (qid,))
        return rec

    def _prep_qubit(self, state, qid, prep) -> None:
        if isinstance(prep, np.ndarray):
            if not isinstance(state, DenseState):
                raise ProtocolViolationError(
                    "amplitude preparations need a dense logical state"
                )
            state.append_state(prepare("amplitudes", amplitudes=prep, ids=(qid,)))
            return
        if prep == "magic_T":
            if not isinstance(state, DenseState):
                raise ProtocolViolationError(
                    "magic-state preparations need the authwire or dense backend"
                )
            state.append_state(prepare("magic_T", ids=(qid,)))
            return
        state.append_zeros((qid,))
        if prep == "one":
            state.apply_clifford(gate_clifford("X", (0,), 1), (qid,))
        elif prep == "plus":
            state.apply_clifford(gate_clifford("H", (0,), 1), (qid,))
        elif prep != "zero":
            raise ConfigError(f"unknown preparation {prep!r}")

    # -- encoding (circulation test) ----------------------------------------

    def encode_all(self, wires=None) -> bool:
        """Encodes every pending wire in one parallel circulation phase.

        Costs ``k`` quantum rounds total and two trusted-computation calls
        regardless of how many wires are in the batch.
        """
        if self.aborted:
            return False
        batch = [w for w in (wires if wires is not None else self.wires)
                 if self.wires[w].status == "pending"]
        if not batch:
            return True

        def setup(memory, inputs):
            return {p: {"phase": "encode", "wires": len(batch)}
                    for p in range(1, self.k + 1)}, None

        if not self._invoke("encode:setup", setup):
            return False

        results = {}
        for w in batch:
            rec = self.wires[w]
            if self.physical:
                results[w] = self._encode_physical(rec)
            else:
                results[w] = self._encode_symbolic(rec)

        for hop in range(1, self.k + 1):
            self.transcript.transit(None, None, "encode", {"hop": hop, "wires": list(batch)})

        accept_map = {w: results[w][0] for w in batch}

        def verify(memory, inputs):
            def update():
                for w in batch:
                    rec = self.wires[w]
                    accept, auth = results[w]
                    if accept:
                        rec.auth = auth
                        rec.status = "encoded"
                        store_key(self.mpc, w, auth)
                    else:
                        rec.status = "rejected"
                        reject_wire(self.mpc, w)
            return {p: dict(accept_map) for p in range(1, self.k + 1)}, update

        if not self._invoke("encode:verify", verify, player_inputs=accept_map):
            return False
        if not all(accept_map.values()):
            bad = sorted(str(w) for w, a in accept_map.items() if not a)
            self.abort(f"encode-reject:{','.join(bad)}")
            return False
        return True

    def _encode_attacks(self, wire) -> list[tuple[object, PauliOp]]:
        reg = 2 * self.n + 1
        found = []
        for hop in list(range(self.k + 1)) + [POST]:
            p = self.adversary.transit_attack("encode", wire, hop)
            if p is None:
                continue
            if p.m != reg:
                raise InvalidDimensionError(
                    f"encode attack at hop {hop} acts on {p.m} qubits, "
                    f"register has {reg}"
                )
            if not p.is_identity_class():
                found.append((hop, p))
        return found

    def _encode_symbolic(self, rec: WireRecord) -> tuple[bool, AuthWire | None]:
        n, k = self.n, self.k
        reg = 2 * n + 1
        attacks = self._encode_attacks(rec.wire)
        if self.adversary.dense_attacks:
            for hop in list(range(k + 1)) + [POST]:
                if self.adversary.dense_attack("encode", rec.wire, hop) is not None:
                    raise ProtocolViolationError(
                        "unitary attacks need the dense backend"
                    )

        fold = PauliOp.identity(reg)
        post_attack = None
        if attacks:
            transit = [(h, p) for h, p in attacks if h != POST]
            post = [p for h, p in attacks if h == POST]
            if post:
                post_attack = post[0]
            if transit:
                twirls = [random_clifford(reg, self.rng) for _ in range(k)]
                prefix = CliffordOp.identity(reg)
                prefixes = [prefix]
                for f in twirls:
                    prefix = compose(f, prefix)
                    prefixes.append(prefix)
                for h, p in transit:
                    folded = conjugate_pauli(inverse(prefixes[h]), p)
                    fold = folded.mul(fold)

        # A deviation landing after the re-encoding unitary splits cleanly:
        # its X-part on the readout block flips the observed string (same
        # slot as a report lie), and its kept-block part folds through the
        # fresh key like any later ciphertext attack.
        lie = self.adversary.test_lie("encode", rec.wire)
        keep_part = None
        if post_attack is not None:
            keep_part = post_attack.restrict(tuple(range(n + 1)))
            lie ^= post_attack.x >> (n + 1)
        accept, residual = _circulation_test(
            fold, n, lie, self.rng, mix_data=rec.ancilla
        )
        auth = AuthWire(rec.wire, n, logical_ref=rec.wire, trap_error=residual)
        if accept and keep_part is not None and not keep_part.is_identity_class():
            authwire_apply_attack(auth, keep_part, self.rng)
        return (accept, auth if accept else None)

    def _encode_physical(self, rec: WireRecord) -> tuple[bool, AuthWire | None]:
        n, k = self.n, self.k
        reg = 2 * n + 1
        w = rec.wire
        ids = tuple(("q", w, j) for j in range(reg))
        self.state.append_zeros(ids[1:])

        def hit(hop) -> None:
            p = self.adversary.transit_attack("encode", w, hop)
            if p is not None:
                if p.m != reg:
                    raise InvalidDimensionError(
                        f"encode attack at hop {hop} acts on {p.m} qubits, "
                        f"register has {reg}"
                    )
                self.state.apply_pauli(p, ids)
            u = self.adversary.dense_attack("encode", w, hop)
            if u is not None:
                self.state.apply_unitary_matrix(u, ids[: int(np.log2(u.shape[0]))])

        hit(0)
        twirl_product = CliffordOp.identity(reg)
        for h in range(1, k + 1):
            f = random_clifford(reg, self.rng)
            self.state.apply_clifford(f, ids)
            twirl_product = compose(f, twirl_product)
            hit(h)

        key = random_clifford(n + 1, self.rng)
        pad_x = int(self.rng.integers(0, 1 << n))
        pad_z = int(self.rng.integers(0, 1 << n))
        g = random_invertible(reg if rec.ancilla else 2 * n, self.rng)

        self.state.apply_clifford(inverse(twirl_product), ids)
        mix_ids = ids if rec.ancilla else ids[1:]
        self.state.apply_clifford(linear_map_clifford(g), mix_ids)
        self.state.apply_clifford(key, ids[: n + 1])
        self.state.apply_pauli(PauliOp(n, pad_x, pad_z, 0), ids[n + 1 :])
        hit(POST)

        readout = measure_z(self.state, ids[n + 1 :], self.rng)
        observed = sum(bit << j for j, bit in enumerate(readout))
        lie = self.adversary.test_lie("encode", w)
        accept = (observed ^ lie) == pad_x
        auth = AuthWire(w, n, logical_ref=w, key=key)
        return (accept, auth if accept else None)

    # -- single-qubit Clifford gates (key update) ----------------------------

    def apply_single_clifford(self, name: str, wire, ctrl: str | None = None) -> None:
        """Applies a 1-qubit Clifford by key update: zero quantum rounds.

        With ``ctrl`` set, the gate fires only if the stored measurement bit
        is 1; the trusted computation evaluates this privately so the
        control bit never leaves it.
        """
        if self.aborted:
            return
        if name not in CLIFF_GATES:
            raise ProtocolViolationError(f"unknown 1-qubit Clifford {name!r}")
        rec = self._require_encoded(wire)
        n = self.n
        bit = 1 if ctrl is None else read_bit(self.mpc, ctrl)

        def update_key(memory, inputs):
            def update():
                if not bit:
                    return
                g1 = gate_clifford(name, (0,), 1)
                auth = rec.auth
                if auth.key is not None:
                    trap_identity = CliffordOp.identity(n)
                    auth.key = compose(auth.key, tensor(inverse(g1), trap_identity))
                auth.trap_error = conjugate_pauli_on(g1, (0,), auth.trap_error)
            return {p: {"gate": name, "wire": str(wire)} for p in range(1, self.k + 1)}, update

        if not self._invoke(f"cliff:{name}:{wire}", update_key):
            return
        if bit and not self.physical:
            self.state.apply_clifford(gate_clifford(name, (0,), 1), (wire,))

    # -- joint CNOT ----------------------------------------------------------

    def apply_cnot(self, control, target, ctrl: str | None = None) -> None:
        """CNOT between two authenticated wires.

        The two ciphertexts plus fresh trap blocks circulate once under
        per-player twirls; the trusted computation folds decode-CNOT-reencode
        into one hidden Clifford; each half then passes a fresh hidden
        linear-map trap test before it is used again.  Costs ``k`` rounds
        plus two if the wires live with different players.
        """
        if self.aborted:
            return
        rec_a = self._require_encoded(control)
        rec_b = self._require_encoded(target)
        n, k = self.n, self.k
        reg = 4 * n + 2
        pair = (control, target)
        bit = 1 if ctrl is None else read_bit(self.mpc, ctrl)
        cross = rec_a.owner != rec_b.owner

        def setup(memory, inputs):
            return {p: {"phase": "cnot", "pair": [str(control), str(target)]}
                    for p in range(1, self.k + 1)}, None

        if not self._invoke(f"cnot:setup:{control}:{target}", setup):
            return

        if cross:
            self.transcript.transit(rec_b.owner, rec_a.owner, "cnot", {"wires": [str(target)]})

        if self.physical:
            accept_a, accept_b = self._cnot_physical(rec_a, rec_b, bit, pair)
        else:
            accept_a, accept_b = self._cnot_symbolic(rec_a, rec_b, bit, pair)

        for hop in range(1, k + 1):
            self.transcript.transit(None, None, "cnot", {"hop": hop, "pair": [str(control), str(target)]})
        if cross:
            self.transcript.transit(rec_a.owner, rec_b.owner, "cnot", {"wires": [str(target)]})

        accept_map = {str(control): accept_a, str(target): accept_b}

        def verify(memory, inputs):
            def update():
                for rec, ok in ((rec_a, accept_a), (rec_b, accept_b)):
                    if ok:
                        store_key(self.mpc, rec.wire, rec.auth)
                    else:
                        rec.status = "rejected"
                        reject_wire(self.mpc, rec.wire)
            return {p: dict(accept_map) for p in range(1, self.k + 1)}, update

        if not self._invoke(f"cnot:verify:{control}:{target}", verify,
                            player_inputs=accept_map):
            return
        if not (accept_a and accept_b):
            self.abort(f"cnot-reject:{control}:{target}")

    def _cnot_attacks(self, pair) -> dict:
        reg = 4 * self.n + 2
        found = {}
        for hop in list(range(self.k + 1)) + [POST]:
            p = self.adversary.transit_attack("cnot", pair, hop)
            if p is None:
                continue
            if p.m != reg:
                raise InvalidDimensionError(
                    f"cnot attack at hop {hop} acts on {p.m} qubits, "
                    f"register has {reg}"
                )
            if not p.is_identity_class():
                found[hop] = p
        return found

    def _cnot_symbolic(self, rec_a, rec_b, bit: int, pair) -> tuple[bool, bool]:
        n, k = self.n, self.k
        reg = 4 * n + 2
        side = 2 * n + 1
        attacks = self._cnot_attacks(pair)
        if self.adversary.dense_attacks:
            for hop in list(range(k + 1)) + [POST]:
                if self.adversary.dense_attack("cnot", pair, hop) is not None:
                    raise ProtocolViolationError(
                        "unitary attacks need the dense backend"
                    )

        # Joint deviation in the decoded frame: old wire residuals occupy
        # [data, kept traps] of each side; the fresh readout traps start
        # clean.
        joint = rec_a.auth.trap_error.embed(reg, tuple(range(n + 1))).mul(
            rec_b.auth.trap_error.embed(reg, tuple(range(side, side + n + 1)))
        )

        transit = {h: p for h, p in attacks.items() if h != POST}
        if transit:
            key_a = rec_a.auth.ensure_key(self.rng)
            key_b = rec_b.auth.ensure_key(self.rng)
            trap_identity = CliffordOp.identity(n)
            frame = tensor(tensor(key_a, trap_identity), tensor(key_b, trap_identity))
            prefix = frame
            if 0 in transit:
                joint = conjugate_pauli(inverse(prefix), transit[0]).mul(joint)
            for h in range(1, k + 1):
                d = random_clifford(reg, self.rng)
                prefix = compose(d, prefix)
                if h in transit:
                    joint = conjugate_pauli(inverse(prefix), transit[h]).mul(joint)

        if bit:
            cnot = gate_clifford("CNOT", (0, side), reg)
            joint = conjugate_pauli(cnot, joint)
            self.state.apply_clifford(
                gate_clifford("CNOT", (0, 1), 2), (rec_a.wire, rec_b.wire)
            )

        if POST in attacks:
            f_a = random_clifford(side, self.rng)
            f_b = random_clifford(side, self.rng)
            folded = conjugate_pauli(inverse(tensor(f_a, f_b)), attacks[POST])
            joint = folded.mul(joint)

        results = []
        for rec, offset in ((rec_a, 0), (rec_b, side)):
            part = joint.restrict(tuple(range(offset, offset + side)))
            lie = self.adversary.test_lie("cnot", rec.wire)
            accept, residual = _circulation_test(
                part, n, lie, self.rng, mix_data=False
            )
            if accept:
                rec.auth = AuthWire(
                    rec.wire, n, logical_ref=rec.wire, trap_error=residual
                )
            results.append(accept)
        return results[0], results[1]

    def _cnot_physical(self, rec_a, rec_b, bit: int, pair) -> tuple[bool, bool]:
        n, k = self.n, self.k
        reg = 4 * n + 2
        side = 2 * n + 1
        fresh_a = tuple(("ct", rec_a.wire, j) for j in range(n))
        fresh_b = tuple(("ct", rec_b.wire, j) for j in range(n))
        ids = self._phys_ids(rec_a.wire) + fresh_a + self._phys_ids(rec_b.wire) + fresh_b
        self.state.append_zeros(fresh_a)
        self.state.append_zeros(fresh_b)

        def hit(hop) -> None:
            p = self.adversary.transit_attack("cnot", pair, hop)
            if p is not None:
                self.state.apply_pauli(p, ids)
            u = self.adversary.dense_attack("cnot", pair, hop)
            if u is not None:
                qcount = int(np.log2(u.shape[0]))
                self.state.apply_unitary_matrix(u, ids[:qcount])

        hit(0)
        twirl_product = CliffordOp.identity(reg)
        for h in range(1, k + 1):
            d = random_clifford(reg, self.rng)
            self.state.apply_clifford(d, ids)
            twirl_product = compose(d, twirl_product)
            hit(h)

        key_a = rec_a.auth.key
        key_b = rec_b.auth.key
        trap_identity = CliffordOp.identity(n)
        decode_both = tensor(tensor(inverse(key_a), trap_identity),
                             tensor(inverse(key_b), trap_identity))
        twirl_a = random_clifford(side, self.rng)
        twirl_b = random_clifford(side, self.rng)

        hidden = compose(decode_both, inverse(twirl_product))
        if bit:
            hidden = compose(gate_clifford("CNOT", (0, side), reg), hidden)
        hidden = compose(tensor(twirl_a, twirl_b), hidden)
        self.state.apply_clifford(hidden, ids)
        hit(POST)

        accepts = []
        for rec, offset, twirl in ((rec_a, 0, twirl_a), (rec_b, side, twirl_b)):
            side_ids = ids[offset : offset + side]
            new_key = random_clifford(n + 1, self.rng)
            pad_x = int(self.rng.integers(0, 1 << n))
            pad_z = int(self.rng.integers(0, 1 << n))
            g = random_invertible(2 * n, self.rng)
            self.state.apply_clifford(inverse(twirl), side_ids)
            self.state.apply_clifford(linear_map_clifford(g), side_ids[1:])
            self.state.apply_clifford(new_key, side_ids[: n + 1])
            self.state.apply_pauli(PauliOp(n, pad_x, pad_z, 0), side_ids[n + 1 :])
            readout = measure_z(self.state, side_ids[n + 1 :], self.rng)
            observed = sum(b << j for j, b in enumerate(readout))
            lie = self.adversary.test_lie("cnot", rec.wire)
            accept = (observed ^ lie) == pad_x
            if accept:
                rec.auth = AuthWire(rec.wire, n, logical_ref=rec.wire, key=new_key)
            accepts.append(accept)
        return accepts[0], accepts[1]

    # -- authenticated computational measurement ------------------------------

    def measure_wire(self, wire, label: str) -> int | None:
        """Measures a wire in the computational basis; result goes to the
        trusted computation under ``label``.

        The released key is pre-composed with a fan-out that copies the data
        bit onto a secret subset of traps, plus a one-time pad, so the owner
        learns nothing and forged reports must guess the subset.  Zero
        quantum rounds.  Returns the stored bit (None on reject/abort).
        """
        if self.aborted:
            return None
        rec = self._require_encoded(wire)
        n = self.n
        lie = self.adversary.measure_lie(wire)
        if lie >> (n + 1):
            raise InvalidDimensionError(
                f"measurement lie 0x{lie:x} exceeds {n + 1} bits"
            )

        if self.physical:
            accept, stored = self._measure_physical(rec, lie)
        else:
            accept, stored = self._measure_symbolic(rec, lie)

        def verify(memory, inputs):
            def update():
                if accept:
                    store_bit(self.mpc, label, stored)
                    erase_key(self.mpc, wire)
                    rec.status = "measured"
                else:
                    rec.status = "rejected"
                    reject_wire(self.mpc, wire)
            return {p: {"label": label, "accept": accept}
                    for p in range(1, self.k + 1)}, update

        if not self._invoke(f"measure:{wire}", verify,
                            player_inputs={rec.owner: {"lie": lie}}):
            return None
        if not accept:
            self.abort(f"measure-reject:{wire}")
            return None
        return stored

    def _measure_symbolic(self, rec, lie: int) -> tuple[bool, int]:
        n = self.n
        err = rec.auth.trap_error
        m_true = self.state.measure_remove(rec.wire, self.rng)[0]
        err_data = err.x & 1
        err_traps = err.x >> 1
        lie_data = lie & 1
        lie_traps = lie >> 1
        # The fan-out copies (data + its X-error) onto the secret subset, so
        # the data error cancels in the trap comparison; what remains is the
        # trap-block flips against lie_data * subset.
        mismatch = err_traps ^ lie_traps
        if lie_data:
            subset = int(self.rng.integers(0, 1 << n))
            accept = mismatch == subset
        else:
            accept = mismatch == 0
        stored = m_true ^ err_data ^ lie_data
        return accept, stored

    def _measure_physical(self, rec, lie: int) -> tuple[bool, int]:
        n = self.n
        ids = self._phys_ids(rec.wire)
        subset = int(self.rng.integers(0, 1 << n))
        pad_x = int(self.rng.integers(0, 1 << (n + 1)))
        pad_z = int(self.rng.integers(0, 1 << (n + 1)))
        fan = [("CNOT", 0, 1 + j) for j in range(n) if (subset >> j) & 1]
        unkey = compose(
            clifford_from_gates(fan, n + 1), inverse(rec.auth.key)
        )
        self.state.apply_clifford(unkey, ids)
        self.state.apply_pauli(PauliOp(n + 1, pad_x, pad_z, 0), ids)
        bits = measure_z(self.state, ids, self.rng)
        observed = sum(b << j for j, b in enumerate(bits))
        reported = observed ^ lie
        unpadded = reported ^ pad_x
        stored = unpadded & 1
        accept = (unpadded >> 1) == (subset if stored else 0)
        # The outcome convention matches the symbolic path: stored bit is the
        # data readout after pad removal.
        return accept, stored

    # -- decode ---------------------------------------------------------------

    def decode_wire(self, wire) -> bool:
        """Releases the key to the owner, who undoes it and checks the traps.

        Zero quantum rounds; rejection aborts the run.  Returns accept.
        """
        if self.aborted:
            return False
        rec = self._require_encoded(wire)

        def release(memory, inputs):
            read_key(self.mpc, wire)  # raises if erased or rejected

            def update():
                erase_key(self.mpc, wire)

            return {p: ({"key": "released"} if p == rec.owner else {})
                    for p in range(1, self.k + 1)}, update

        if not self._invoke(f"decode:{wire}", release):
            return False

        if self.physical:
            ids = self._phys_ids(wire)
            self.state.apply_clifford(inverse(rec.auth.key), ids)
            traps = measure_z(self.state, ids[1:], self.rng)
            accept = not any(traps)
        else:
            accept = rec.auth.accepts_on_decode()
            if accept:
                residual = rec.auth.logical_residual()
                if not residual.is_identity_class():
                    self.state.apply_pauli(residual, (wire,))
        if accept:
            rec.status = "decoded"
        else:
            rec.status = "rejected"
            self.abort(f"decode-reject:{wire}")
        return accept

    # -- magic-state consumption ----------------------------------------------

    def t_gadget(self, data_wire, magic_wire) -> object:
        """Applies a T gate to ``data_wire`` by teleporting through an
        authenticated magic wire.  Returns the wire now carrying the state.

        Gadget: CNOT (magic controls data), measure the data wire, then a
        classically-controlled X and S on the magic wire.
        """
        if self.backend == "tableau":
            raise ProtocolViolationError(
                "T gates need the authwire or dense backend"
            )
        label = f"_tg{self._gadget_count}"
        self._gadget_count += 1
        self.apply_cnot(magic_wire, data_wire)
        self.measure_wire(data_wire, label)
        self.apply_single_clifford("X", magic_wire, ctrl=label)
        self.apply_single_clifford("S", magic_wire, ctrl=label)
        return magic_wire

    # -- full circuit runs ------------------------------------------------------

    def run_clifford_circuit(
        self, circuit: CircuitIR, inputs=None, measure_outputs: bool = True
    ) -> dict:
        """Evaluates a Clifford-only circuit end to end (T gates rejected)."""
        return self._execute(circuit, inputs, measure_outputs, allow_t=False)

    def run_mpqc(
        self, circuit: CircuitIR, inputs=None, measure_outputs: bool = True
    ) -> dict:
        """Evaluates a Clifford+T circuit: magic wires are produced and
        tested first, then T gates become teleportation gadgets."""
        return self._execute(circuit, inputs, measure_outputs, allow_t=True)

    def _execute(self, circuit, inputs, measure_outputs: bool, allow_t: bool) -> dict:
        validate_circuit(circuit)
        if circuit.k != self.k:
            raise ConfigError(
                f"circuit declares {circuit.k} players, session has {self.k}"
            )
        inputs = inputs or {}
        for w in inputs:
            if w not in circuit.input_of:
                raise ConfigError(f"input for undeclared wire {w!r}")
            if circuit.input_of[w] is None:
                raise ProtocolViolationError(
                    f"wire {w!r} is an ancilla; the protocol pins it to |0> "
                    "(script an attack to model a corrupted preparation)"
                )
        t_count = circuit.t_count
        if t_count and not allow_t:
            raise ProtocolViolationError(
                "circuit contains T gates; use run_mpqc"
            )

        magic_pool: list = []
        if allow_t and t_count:
            from .distill import create_magic_states

            magic_pool = list(create_magic_states(self, t_count))

        for w, owner in circuit.input_of.items():
            self.add_wire(w, owner, prep=inputs.get(w, "zero"))
        self.encode_all(list(circuit.input_of))

        alias = {w: w for w in circuit.input_of}
        for gate in circuit.gates:
            if self.aborted:
                break
            if gate.kind == "cliff":
                self.apply_single_clifford(gate.name, alias[gate.wires[0]], gate.ctrl)
            elif gate.kind == "cnot":
                self.apply_cnot(alias[gate.wires[0]], alias[gate.wires[1]], gate.ctrl)
            elif gate.kind == "meas":
                self.measure_wire(alias[gate.wires[0]], gate.label)
            elif gate.kind == "t":
                carrier = self.t_gadget(alias[gate.wires[0]], magic_pool.pop(0))
                alias[gate.wires[0]] = carrier
            else:  # pragma: no cover - parse guarantees the kinds
                raise ProtocolViolationError(f"unknown gate kind {gate.kind!r}")

        outputs: dict = {}
        meas: dict = {}
        if not self.aborted:
            for w, receiver in circuit.output_of.items():
                if receiver is None:
                    continue
                if self.decode_wire(alias[w]) and measure_outputs:
                    if self.physical:
                        outputs[w] = self.state.measure_remove(
                            ("q", alias[w], 0), self.rng
                        )[0]
                    else:
                        outputs[w] = self.state.measure_remove(alias[w], self.rng)[0]
        for gate in circuit.gates:
            if gate.kind == "meas":
                try:
                    meas[gate.label] = read_bit(self.mpc, gate.label)
                except (ProtocolViolationError, KeyError):
                    pass
        return {
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "meas": meas,
            "outputs": outputs,
            "account": account(self.transcript),
        }


# ---------------------------------------------------------------------------
# Reference (ideal-world) evaluation
# ---------------------------------------------------------------------------


def simulate_plain(circuit: CircuitIR, inputs=None, rng=None,
                   backend: str = "tableau") -> dict:
    """Evaluates the circuit directly on plaintext qubits (no players, no
    authentication) — the reference semantics every protocol run must match.
    """
    validate_circuit(circuit)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    inputs = inputs or {}
    needs_dense = backend == "dense" or circuit.t_count > 0 or any(
        isinstance(v, np.ndarray) or v == "magic_T" for v in inputs.values()
    )
    state = prepare("zero", 0, backend="dense" if needs_dense else "tableau", ids=())
    for w in circuit.input_of:
        prep = inputs.get(w, "zero")
        if isinstance(prep, np.ndarray):
            state.append_state(prepare("amplitudes", amplitudes=prep, ids=(w,)))
        elif prep == "magic_T":
            state.append_state(prepare("magic_T", ids=(w,)))
        else:
            state.append_zeros((w,))
            if prep == "one":
                state.apply_clifford(gate_clifford("X", (0,), 1), (w,))
            elif prep == "plus":
                state.apply_clifford(gate_clifford("H", (0,), 1), (w,))
            elif prep != "zero":
                raise ConfigError(f"unknown preparation {prep!r}")

    labels: dict[str, int] = {}
    for gate in circuit.gates:
        fire = 1 if gate.ctrl is None else labels[gate.ctrl]
        if gate.kind == "cliff":
            if fire:
                state.apply_clifford(gate_clifford(gate.name, (0,), 1), gate.wires)
        elif gate.kind == "cnot":
            if fire:
                state.apply_clifford(gate_clifford("CNOT", (0, 1), 2), gate.wires)
        elif gate.kind == "meas":
            labels[gate.label] = state.measure_remove(gate.wires[0], rng)[0]
        elif gate.kind == "t":
            state.apply_gate("T", gate.wires)

    outputs = {}
    for w, receiver in circuit.output_of.items():
        if receiver is not None:
            outputs[w] = state.measure_remove(w, rng)[0]
    return {"aborted": False, "abort_reason": None, "meas": labels,
            "outputs": outputs}


def ideal_functionality(kind: str, **kw) -> dict:
    """Reference functionalities the simulators plug attacks into.

    kinds:
        ``"mpqc"``: full evaluation — plaintext run; a set ``abort_bit``
            replaces every honest output with the abort marker.
        ``"enc"``: hands back authenticated wires under fresh hidden keys.
        ``"clifford_nodecode"``: plaintext run, but outputs stay encoded
            under fresh keys (measurement results stored, nothing decoded).
        ``"magic"``: ``count`` authenticated magic wires under fresh keys.
    """
    rng = kw.get("rng")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = kw.get("n", 1)
    if kind == "mpqc":
        if kw.get("abort_bit"):
            circuit = kw["circuit"]
            return {
                "aborted": True,
                "abort_reason": "adversary",
                "meas": {},
                "outputs": {w: "ABORT" for w, p in circuit.output_of.items()
                            if p is not None},
            }
        return simulate_plain(kw["circuit"], kw.get("inputs"), rng,
                              kw.get("backend", "tableau"))
    if kind == "enc":
        if kw.get("abort_bit"):
            return {"aborted": True, "wires": {}}
        wires = {w: AuthWire(w, n, logical_ref=w) for w in kw["wires"]}
        return {"aborted": False, "wires": wires}
    if kind == "clifford_nodecode":
        circuit = kw["circuit"]
        if circuit.t_count:
            raise ProtocolViolationError("Clifford functionality got a T gate")
        plain = simulate_plain(circuit, kw.get("inputs"), rng)
        wires = {
            w: AuthWire(w, n, logical_ref=w)
            for w, p in circuit.output_of.items() if p is not None
        }
        return {"aborted": False, "meas": plain["meas"], "wires": wires}
    if kind == "magic":
        count = kw.get("count", 1)
        return {
            "aborted": False,
            "wires": [AuthWire(("magic", i), n, logical_ref=("magic", i))
                      for i in range(count)],
        }
    raise ConfigError(f"unknown ideal functionality {kind!r}")


# ---------------------------------------------------------------------------
# Attack-filter simulators (ideal-world counterparts of the real tests)
# ---------------------------------------------------------------------------


def simulate_encode_adversary(
    n: int, k: int, script: AdversaryScript, wire, rng: np.random.Generator
) -> dict:
    """Ideal-world run of one encoding under a scripted Pauli adversary.

    The simulator samples its own twirls (it plays the honest parties),
    folds the scripted attacks exactly as the real run would, then replaces
    the hidden-linear-map test by its filter limit: accept iff the folded
    deviation has no X-component anywhere on the trap block and the report
    is honest.  The surviving data-block component becomes the residual.
    """
    reg = 2 * n + 1
    transit = []
    for hop in list(range(k + 1)) + [POST]:
        p = script.transit_attack("encode", wire, hop)
        if p is not None and not p.is_identity_class():
            transit.append((hop, p))
    fold = PauliOp.identity(reg)
    if any(h != POST for h, _ in transit):
        prefix = CliffordOp.identity(reg)
        prefixes = [prefix]
        for _ in range(k):
            prefix = compose(random_clifford(reg, rng), prefix)
            prefixes.append(prefix)
        for h, p in transit:
            if h != POST:
                fold = conjugate_pauli(inverse(prefixes[h]), p).mul(fold)
    post = [p for h, p in transit if h == POST]
    lie = script.test_lie("encode", wire)
    if post:
        lie ^= post[0].x >> (n + 1)
    accept = (fold.x >> 1) == 0 and lie == 0
    residual = PauliOp(n + 1, fold.x & 1, fold.z & 1, 0)
    if post and accept:
        sim_key = random_clifford(n + 1, rng)
        keep = post[0].restrict(tuple(range(n + 1)))
        if not keep.is_identity_class():
            residual = conjugate_pauli(inverse(sim_key), keep).mul(residual)
    return {"accept": accept, "residual": residual}


def simulate_cnot_adversary(
    n: int,
    k: int,
    script: AdversaryScript,
    pair,
    err_a: PauliOp,
    err_b: PauliOp,
    rng: np.random.Generator,
    bit: int = 1,
) -> dict:
    """Ideal-world run of one joint CNOT under a scripted Pauli adversary.

    Same folding as the real run with simulator-sampled keys and twirls;
    each side's hidden test is replaced by its filter limit (no X-component
    on that side's trap block, honest report)."""
    reg = 4 * n + 2
    side = 2 * n + 1
    joint = err_a.embed(reg, tuple(range(n + 1))).mul(
        err_b.embed(reg, tuple(range(side, side + n + 1)))
    )
    transit = {}
    for hop in list(range(k + 1)) + [POST]:
        p = script.transit_attack("cnot", pair, hop)
        if p is not None and not p.is_identity_class():
            transit[hop] = p
    circulating = {h: p for h, p in transit.items() if h != POST}
    if circulating:
        trap_identity = CliffordOp.identity(n)
        sim_key_a = random_clifford(n + 1, rng)
        sim_key_b = random_clifford(n + 1, rng)
        prefix = tensor(tensor(sim_key_a, trap_identity),
                        tensor(sim_key_b, trap_identity))
        if 0 in circulating:
            joint = conjugate_pauli(inverse(prefix), circulating[0]).mul(joint)
        for h in range(1, k + 1):
            prefix = compose(random_clifford(reg, rng), prefix)
            if h in circulating:
                joint = conjugate_pauli(inverse(prefix), circulating[h]).mul(joint)
    if bit:
        joint = conjugate_pauli(gate_clifford("CNOT", (0, side), reg), joint)
    if POST in transit:
        f_a = random_clifford(side, rng)
        f_b = random_clifford(side, rng)
        joint = conjugate_pauli(inverse(tensor(f_a, f_b)), transit[POST]).mul(joint)

    out = {}
    for name, wire_key, offset in (("a", pair[0], 0), ("b", pair[1], side)):
        part = joint.restrict(tuple(range(offset, offset + side)))
        lie = script.test_lie("cnot", wire_key)
        accept = (part.x >> 1) == 0 and lie == 0
        keep_mask = (1 << (n + 1)) - 1
        out[f"accept_{name}"] = accept
        out[f"residual_{name}"] = PauliOp(
            n + 1, part.x & 1, part.z & keep_mask, 0
        )
    return out


def simulate_measure_adversary(
    n: int, script: AdversaryScript, wire, err: PauliOp, m_plain: int
) -> dict:
    """Ideal-world authenticated measurement: the simulator accepts only
    reports consistent with zero deviation (it has no secret subset to
    gamble against)."""
    lie = script.measure_lie(wire)
    lie_data = lie & 1
    mismatch = (err.x >> 1) ^ (lie >> 1)
    accept = lie_data == 0 and mismatch == 0
    stored = m_plain ^ (err.x & 1) if accept else None
    return {"accept": accept, "bit": stored}


def _wilson_halfwidth(p_hat: float, trials: int, z: float = 2.576) -> float:
    if trials == 0:
        return 1.0
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = (
        z
        * np.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials))
        / denom
    )
    return float(half + abs(center - p_hat))


def distinguishing_advantage(
    protocol: str,
    n: int,
    k: int,
    script_factory,
    trials: int,
    rng=None,
    env=None,
) -> dict:
    """Estimates |P[env accepts real run] - P[env accepts ideal run]|.

    Args:
        protocol: ``"encode"`` | ``"cnot"`` | ``"measure"``.
        script_factory: ``(trial_rng) -> AdversaryScript`` built fresh per
            trial (attacks may be randomized).
        env: Optional ``record -> bit`` distinguisher; defaults to the
            accept flag.
        trials: Per-world trial count.

    Returns dict with per-world estimates, the advantage, and 99% Wilson
    half-widths.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if protocol not in ("encode", "cnot", "measure"):
        raise ConfigError(f"unknown protocol {protocol!r}")
    if env is None:
        env = lambda record: 1 if record["accept"] else 0

    real_hits = 0
    ideal_hits = 0
    for _ in range(trials):
        script = script_factory(rng)

        if protocol == "encode":
            session = Session(k, n, rng=rng, corrupted=frozenset({k}),
                              adversary=script)
            session.add_wire("w", 1)
            ok = session.encode_all(["w"])
            record = {"accept": bool(ok)}
            sim = simulate_encode_adversary(n, k, script, "w", rng)
            sim_record = {"accept": sim["accept"]}
        elif protocol == "cnot":
            session = Session(k, n, rng=rng, corrupted=frozenset({k}),
                              adversary=script)
            session.add_wire("a", 1)
            session.add_wire("b", 1)
            session.encode_all(["a", "b"])
            session.apply_cnot("a", "b")
            record = {"accept": not session.aborted}
            sim = simulate_cnot_adversary(
                n, k, script, ("a", "b"),
                PauliOp.identity(n + 1), PauliOp.identity(n + 1), rng
            )
            sim_record = {"accept": sim["accept_a"] and sim["accept_b"]}
        else:
            session = Session(k, n, rng=rng, corrupted=frozenset({k}),
                              adversary=script)
            session.add_wire("w", 1)
            session.encode_all(["w"])
            stored = session.measure_wire("w", "m")
            record = {"accept": not session.aborted, "bit": stored}
            sim = simulate_measure_adversary(
                n, script, "w", PauliOp.identity(n + 1), 0
            )
            sim_record = {"accept": sim["accept"], "bit": sim["bit"]}

        real_hits += env(record)
        ideal_hits += env(sim_record)

    p_real = real_hits / trials
    p_ideal = ideal_hits / trials
    return {
        "protocol": protocol,
        "n": n,
        "k": k,
        "trials": trials,
        "p_real": p_real,
        "p_ideal": p_ideal,
        "advantage": abs(p_real - p_ideal),
        "ci_half_real": _wilson_halfwidth(p_real, trials),
        "ci_half_ideal": _wilson_halfwidth(p_ideal, trials),
    }


# ---------------------------------------------------------------------------
# Exact forged-measurement deviation
# ---------------------------------------------------------------------------


def measurement_lie_deviation(n: int, weights=(Fraction(1, 2), Fraction(1, 2))) -> dict:
    """Exact real-vs-ideal deviation of the authenticated measurement under
    every possible classical report forgery.

    For each forged XOR pattern ``b`` on the ``n+1`` reported bits, computes
    the total-variation distance between the real outcome distribution over
    {accept with stored bit 0, accept with stored bit 1, reject} and the
    ideal simulator's (which rejects every forgery).  Exact rational
    arithmetic; the maximum equals ``2^-n`` (achieved whenever the forged
    data bit is set), independent of the measured state's distribution.

    Args:
        n: Trap count.
        weights: Plaintext outcome distribution (p0, p1) as Fractions.

    Returns dict with per-pattern deviations, the maximum, and the bound.
    """
    p0, p1 = Fraction(weights[0]), Fraction(weights[1])
    if p0 + p1 != 1:
        raise ConfigError("outcome weights must sum to 1")
    hit = Fraction(1, 2**n)
    per: dict[int, Fraction] = {}
    for lie in range(1 << (n + 1)):
        lie_data = lie & 1
        lie_traps = lie >> 1
        if lie == 0:
            per[lie] = Fraction(0)
        elif lie_data == 0:
            # Trap-only forgery: both worlds reject with certainty.
            per[lie] = Fraction(0)
        else:
            # Real world: accepts iff the secret subset matches lie_traps
            # (probability 2^-n), storing the flipped bit; ideal rejects.
            # TV = (1/2) (hit*p_flip0 + hit*p_flip1 + hit) = hit.
            per[lie] = Fraction(1, 2) * (hit * p1 + hit * p0 + hit)
    max_dev = max(per.values())
    return {
        "n": n,
        "per_lie": per,
        "max_deviation": max_dev,
        "bound": hit,
        "max_achieved_at": sorted(b for b, v in per.items() if v == max_dev),
    }
