"""Protocol engine tests: parsing, honest completeness against plaintext
reference runs, exact detection-probability formulas derived by direct
counting, symbolic-vs-physical route agreement, round accounting, abort
containment, and the ideal-world simulators."""

from fractions import Fraction

import numpy as np
import pytest

from qmpc.backend import measure_T_basis
from qmpc.errors import (
    ConfigError,
    KeyErasedError,
    PartitionViolationError,
    ProtocolViolationError,
)
from qmpc.gf2 import random_invertible
from qmpc.mpc import read_bit, read_key
from qmpc.pauli_clifford import (
    CliffordOp,
    PauliOp,
    conjugate_pauli,
    random_clifford,
    to_dense,
)
from qmpc.protocol import (
    AdversaryScript,
    POST,
    Session,
    account,
    distinguishing_advantage,
    ideal_functionality,
    linear_map_clifford,
    measurement_lie_deviation,
    parse_circuit,
    simulate_cnot_adversary,
    simulate_encode_adversary,
    simulate_measure_adversary,
    simulate_plain,
)

RNG = np.random.default_rng


BELL_TEXT = """
PLAYERS 2
WIRE a IN 1
WIRE a OUT 1
WIRE b IN 2
WIRE b OUT 2
CLIFF H a
CNOT a b
"""


def sigma(p: float, trials: int) -> float:
    return float(np.sqrt(p * (1 - p) / trials))


# ---------------------------------------------------------------------------
# Independently derived detection-rate oracles (direct counting)
# ---------------------------------------------------------------------------


def uniform_class_accept_probability(n: int) -> Fraction:
    """Acceptance of the circulation test against a deviation whose folded
    class is uniform over the 4^(2n+1)-1 non-identity classes.

    Counting: classes with no X-part on the trap block always pass
    (2^(2n+2)-1 of them); the rest pass iff a uniform invertible map sends
    the nonzero trap X-vector into the kept half, probability
    (2^n-1)/(2^2n-1).
    """
    reg_classes = 4 ** (2 * n + 1) - 1
    xt_zero = 2 ** (2 * n + 2) - 1
    xt_nonzero = reg_classes + 1 - 2 ** (2 * n + 2)
    hit = Fraction(2**n - 1, 2 ** (2 * n) - 1)
    return (xt_zero + xt_nonzero * hit) / Fraction(reg_classes)


def ancilla_flip_accept_probability(n: int) -> Fraction:
    """Acceptance when a corrupted preparer submits |1> as a pinned ancilla:
    the X-deviation's image under a uniform invertible map on all 2n+1
    coordinates is a uniform nonzero vector, accepted iff its readout half
    is zero."""
    return Fraction(2 ** (n + 1) - 1, 2 ** (2 * n + 1) - 1)


def trap_flip_accept_probability(n: int) -> Fraction:
    """Acceptance of a fixed X on one kept trap injected before any twirl."""
    return Fraction(2**n - 1, 2 ** (2 * n) - 1)


def sim_accept_probability(n: int) -> Fraction:
    """Filter-simulator acceptance against a uniform non-identity class:
    only classes with zero X-part on the whole trap block pass."""
    return Fraction(2 ** (2 * n + 2) - 1, 4 ** (2 * n + 1) - 1)


# ---------------------------------------------------------------------------
# Parser and validation
# ---------------------------------------------------------------------------


class TestCircuitParsing:
    def test_round_trip_structure(self):
        ir = parse_circuit(
            """
            PLAYERS 3
            WIRE x IN 1      # alice's qubit
            WIRE x OUT 2
            WIRE anc ANCILLA
            WIRE anc DISCARD
            CLIFF H x
            CNOT x anc
            MEAS anc -> m
            CLIFF Z x ctrl=m
            """
        )
        assert ir.k == 3
        assert ir.input_of == {"x": 1, "anc": None}
        assert ir.output_of == {"x": 2, "anc": None}
        kinds = [g.kind for g in ir.gates]
        assert kinds == ["cliff", "cnot", "meas", "cliff"]
        assert ir.gates[3].ctrl == "m"
        assert ir.gates[2].label == "m"
        assert ir.t_count == 0

    def test_syntax_errors_carry_line_numbers(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_circuit("WIRE a IN 1")
        with pytest.raises(ConfigError, match="line 3"):
            parse_circuit("PLAYERS 2\nWIRE a IN 1\nFROB a")
        with pytest.raises(ConfigError, match="line 3"):
            parse_circuit("PLAYERS 2\nWIRE a IN 1\nCLIFF Q a")

    def test_partition_violations(self):
        base = "PLAYERS 2\nWIRE a IN 1\n"
        with pytest.raises(PartitionViolationError, match="line 3"):
            parse_circuit(base + "WIRE a IN 2\nWIRE a OUT 1")
        with pytest.raises(PartitionViolationError, match="output-side"):
            parse_circuit(base)
        with pytest.raises(PartitionViolationError, match="outside"):
            parse_circuit("PLAYERS 2\nWIRE a IN 9\nWIRE a OUT 1")
        with pytest.raises(PartitionViolationError, match="DISCARD"):
            parse_circuit(base + "WIRE a OUT 1\nMEAS a -> m")

    def test_gate_sequence_violations(self):
        base = "PLAYERS 2\nWIRE a IN 1\nWIRE a DISCARD\n"
        two = base + "WIRE b IN 2\nWIRE b DISCARD\n"
        with pytest.raises(ProtocolViolationError, match="undeclared"):
            parse_circuit(base + "CLIFF H zz")
        with pytest.raises(ProtocolViolationError, match="distinct"):
            parse_circuit(base + "CNOT a a")
        with pytest.raises(ProtocolViolationError, match="earlier MEAS"):
            parse_circuit(base + "CLIFF X a ctrl=m")
        with pytest.raises(ProtocolViolationError, match="after its measurement"):
            parse_circuit(base + "MEAS a -> m\nCLIFF H a")
        with pytest.raises(ProtocolViolationError, match="duplicate label"):
            parse_circuit(two + "MEAS a -> m\nMEAS b -> m")


# ---------------------------------------------------------------------------
# Honest completeness: protocol output == plaintext reference
# ---------------------------------------------------------------------------


class TestHonestCompleteness:
    def test_deterministic_x_and_output(self):
        ir = parse_circuit(
            "PLAYERS 2\nWIRE w IN 1\nWIRE w OUT 2\nCLIFF X w"
        )
        for seed in range(6):
            s = Session(2, 2, rng=seed)
            out = s.run_clifford_circuit(ir)
            assert not out["aborted"]
            assert out["outputs"] == {"w": 1}

    def test_double_hadamard_identity(self):
        ir = parse_circuit(
            "PLAYERS 2\nWIRE w IN 1\nWIRE w OUT 1\nCLIFF H w\nCLIFF H w"
        )
        for seed in range(6):
            out = Session(2, 1, rng=seed).run_clifford_circuit(ir)
            assert out["outputs"] == {"w": 0} and not out["aborted"]

    @pytest.mark.parametrize("a,b", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_cnot_truth_table(self, a, b):
        ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a OUT 1\n"
            "WIRE b IN 2\nWIRE b OUT 2\nCNOT a b"
        )
        inputs = {"a": "one" if a else "zero", "b": "one" if b else "zero"}
        for seed in range(3):
            out = Session(2, 1, rng=seed).run_clifford_circuit(ir, inputs)
            assert not out["aborted"]
            assert out["outputs"] == {"a": a, "b": a ^ b}

    def test_measurement_and_classical_control(self):
        # |1> measured; the stored bit classically flips the other wire.
        ir = parse_circuit(
            "PLAYERS 3\nWIRE a IN 1\nWIRE a DISCARD\n"
            "WIRE b IN 2\nWIRE b OUT 2\nMEAS a -> m\nCLIFF X b ctrl=m"
        )
        for seed in range(5):
            out = Session(3, 2, rng=seed).run_clifford_circuit(ir, {"a": "one"})
            assert out["meas"] == {"m": 1}
            assert out["outputs"] == {"b": 1}

    def test_x_correction_cancels_everywhere(self):
        # H|1> then CNOT makes (|00>-|11>)/sqrt2; measuring the target and
        # X-correcting the control always leaves |0> up to sign.
        ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a OUT 1\nWIRE b IN 2\n"
            "WIRE b DISCARD\nCLIFF H a\nCNOT a b\nMEAS b -> m\n"
            "CLIFF X a ctrl=m"
        )
        seen = set()
        for seed in range(24):
            out = Session(2, 1, rng=seed).run_clifford_circuit(ir, {"a": "one"})
            assert not out["aborted"]
            assert out["outputs"] == {"a": 0}
            seen.add(out["meas"]["m"])
        assert seen == {0, 1}

    def test_hadamard_output_uniform(self):
        ir = parse_circuit("PLAYERS 2\nWIRE w IN 1\nWIRE w OUT 1\nCLIFF H w")
        rng = RNG(42)
        hits = sum(
            Session(2, 1, rng=rng).run_clifford_circuit(ir)["outputs"]["w"]
            for _ in range(400)
        )
        assert abs(hits / 400 - 0.5) < 4 * sigma(0.5, 400)

    def test_matches_plaintext_reference_on_bell_marginals(self):
        ir = parse_circuit(BELL_TEXT)
        rng = RNG(7)
        runs = [
            Session(2, 1, rng=rng).run_clifford_circuit(ir)["outputs"]
            for _ in range(300)
        ]
        refs = [simulate_plain(ir, rng=rng)["outputs"] for _ in range(300)]
        # Perfect correlation in both worlds; marginals uniform.
        assert all(o["a"] == o["b"] for o in runs)
        assert all(o["a"] == o["b"] for o in refs)
        p_run = sum(o["a"] for o in runs) / 300
        p_ref = sum(o["a"] for o in refs) / 300
        assert abs(p_run - 0.5) < 4 * sigma(0.5, 300)
        assert abs(p_ref - 0.5) < 4 * sigma(0.5, 300)


# ---------------------------------------------------------------------------
# Round accounting
# ---------------------------------------------------------------------------


class TestRounds:
    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_exact_round_counts(self, k):
        # One parallel encode batch (k rounds), one same-owner CNOT (k),
        # one cross-owner CNOT (k+2); 1-qubit gates, measurements and
        # decodes are free.
        ir = parse_circuit(
            f"PLAYERS {k}\n"
            "WIRE a IN 1\nWIRE a OUT 1\n"
            "WIRE b IN 1\nWIRE b DISCARD\n"
            "WIRE c IN 2\nWIRE c OUT 2\n"
            "CLIFF H a\nCNOT a b\nCNOT a c\nMEAS b -> m0\nCLIFF X a ctrl=m0"
        )
        s = Session(k, 1, rng=1)
        out = s.run_clifford_circuit(ir)
        assert not out["aborted"]
        acct = out["account"]
        assert acct["rounds_by_phase"]["encode"] == k
        assert acct["rounds_by_phase"]["cnot"] == k + (k + 2)
        assert acct["quantum_rounds"] == 3 * k + 2

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_clifford_only_costs_one_encode_phase(self, k):
        ir = parse_circuit(
            f"PLAYERS {k}\nWIRE a IN 1\nWIRE a OUT 1\n"
            "CLIFF H a\nCLIFF S a\nCLIFF H a"
        )
        out = Session(k, 1, rng=0).run_clifford_circuit(ir)
        assert out["account"]["quantum_rounds"] == k

    def test_mpc_calls_logged(self):
        ir = parse_circuit(BELL_TEXT)
        out = Session(2, 1, rng=0).run_clifford_circuit(ir)
        # encode setup+verify, cliff, cnot setup+verify, 2 decode releases.
        assert out["account"]["mpc_calls"] == 7


# ---------------------------------------------------------------------------
# Key-update gates
# ---------------------------------------------------------------------------


class TestKeyUpdates:
    def test_four_phase_gates_restore_the_key(self):
        s = Session(2, 2, rng=3)
        s.add_wire("w", 1)
        s.encode_all()
        key_before = s.wires["w"].auth.ensure_key(s.rng)
        for _ in range(4):
            s.apply_single_clifford("S", "w")
        assert s.wires["w"].auth.key == key_before

    def test_key_update_composes_against_physical_decode(self):
        # Dense route: X then H by key update only, then decode; the
        # plaintext must equal H X |0> = |->, giving uniform data readout
        # with traps intact.
        hits = 0
        for seed in range(60):
            s = Session(2, 1, rng=seed, backend="dense")
            s.add_wire("w", 1)
            s.encode_all()
            s.apply_single_clifford("X", "w")
            s.apply_single_clifford("H", "w")
            assert s.decode_wire("w")
            hits += s.state.measure_remove(("q", "w", 0), s.rng)[0]
        assert 12 <= hits <= 48  # uniform within ~4 sigma

    def test_controlled_gate_with_zero_bit_is_identity(self):
        ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a DISCARD\nWIRE b IN 2\n"
            "WIRE b OUT 2\nMEAS a -> m\nCLIFF X b ctrl=m"
        )
        out = Session(2, 1, rng=9).run_clifford_circuit(ir)  # a = |0>
        assert out["meas"] == {"m": 0}
        assert out["outputs"] == {"b": 0}


# ---------------------------------------------------------------------------
# Encoding attacks: exact detection rates
# ---------------------------------------------------------------------------


class TestEncodeAttacks:
    def test_hop_zero_data_flip_accepted_and_visible(self):
        # Before any twirl, an X on the data qubit is indistinguishable from
        # a flipped submission: the test accepts and the decoded output is 1.
        n = 2
        attack = PauliOp.single(2 * n + 1, 0, "X")
        ir = parse_circuit("PLAYERS 2\nWIRE w IN 1\nWIRE w OUT 1")
        for seed in range(8):
            script = AdversaryScript(
                transit_attacks={("encode", "w", 0): attack}
            )
            s = Session(2, n, rng=seed, corrupted=frozenset({1}),
                        adversary=script)
            out = s.run_clifford_circuit(ir)
            assert not out["aborted"]
            assert out["outputs"] == {"w": 1}

    def test_hop_zero_trap_flip_detection_rate(self):
        n = 2
        attack = PauliOp.single(2 * n + 1, 1, "X")  # first kept trap
        expected = float(trap_flip_accept_probability(n))  # 3/15
        accepts = 0
        trials = 1500
        rng = RNG(10)
        for _ in range(trials):
            script = AdversaryScript(transit_attacks={("encode", "w", 0): attack})
            s = Session(2, n, rng=rng, corrupted=frozenset({2}), adversary=script)
            s.add_wire("w", 1)
            accepts += bool(s.encode_all(["w"]))
        assert abs(accepts / trials - expected) < 4 * sigma(expected, trials)

    def test_transit_attack_detection_rate_matches_counting(self):
        # A fixed Pauli injected after the first twirl folds to a uniform
        # non-identity class; acceptance must match the counting formula.
        n = 2
        attack = PauliOp.single(2 * n + 1, 0, "X")
        expected = float(uniform_class_accept_probability(n))  # 255/1023
        trials = 2000
        rng = RNG(11)
        accepts = 0
        for _ in range(trials):
            script = AdversaryScript(transit_attacks={("encode", "w", 1): attack})
            s = Session(2, n, rng=rng, corrupted=frozenset({2}), adversary=script)
            s.add_wire("w", 1)
            accepts += bool(s.encode_all(["w"]))
        assert abs(accepts / trials - expected) < 4 * sigma(expected, trials)

    def test_z_only_attacks_always_accept_and_stay_invisible(self):
        n = 2
        z_attack = PauliOp(2 * n + 1, 0, 0b10110, 0)
        ir = parse_circuit("PLAYERS 2\nWIRE w IN 1\nWIRE w OUT 1")
        for seed in range(8):
            script = AdversaryScript(transit_attacks={("encode", "w", 0): z_attack})
            s = Session(2, n, rng=seed, corrupted=frozenset({1}), adversary=script)
            out = s.run_clifford_circuit(ir)
            assert not out["aborted"]
            assert out["outputs"] == {"w": 0}

    def test_report_lie_alone_rejects(self):
        n = 2
        rng = RNG(12)
        for lie in (1, 0b11):
            script = AdversaryScript(test_lies={("encode", "w"): lie})
            s = Session(2, n, rng=rng, corrupted=frozenset({1}), adversary=script)
            s.add_wire("w", 1)
            assert not s.encode_all(["w"])
            assert s.aborted and "encode-reject" in s.abort_reason

    def test_corrupted_ancilla_submission_rate(self):
        # Submitting |1> where the protocol pins |0>: modeled as a hop-0
        # data flip with the data coordinate included in the hidden map.
        n = 2
        attack = PauliOp.single(2 * n + 1, 0, "X")
        expected = float(ancilla_flip_accept_probability(n))  # 7/31
        trials = 2000
        rng = RNG(13)
        accepts = 0
        for _ in range(trials):
            script = AdversaryScript(transit_attacks={("encode", "anc", 0): attack})
            s = Session(2, n, rng=rng, corrupted=frozenset({1}), adversary=script)
            s.add_wire("anc", None)
            accepts += bool(s.encode_all(["anc"]))
        assert abs(accepts / trials - expected) < 4 * sigma(expected, trials)

    def test_plus_ancilla_dense_acceptance_between_flip_rate_and_one(self):
        # A |+> submission is a coherent half-flip; its physical acceptance
        # lies strictly between the |1> rate and 1 (measured, dense route).
        n, trials = 1, 240
        rng = RNG(14)
        accepts = 0
        for _ in range(trials):
            script = AdversaryScript(prep_overrides={"anc": "plus"})
            s = Session(2, n, rng=rng, backend="dense",
                        corrupted=frozenset({1}), adversary=script)
            s.add_wire("anc", None)
            accepts += bool(s.encode_all(["anc"]))
        rate = accepts / trials
        flip_rate = float(ancilla_flip_accept_probability(n))  # 3/7
        assert flip_rate + 0.05 < rate < 1 - 0.02


# ---------------------------------------------------------------------------
# CNOT attacks and residual propagation
# ---------------------------------------------------------------------------


class TestCnotAttacks:
    def _attacked_pair_accept(self, n, attack_qubit, trials, seed):
        reg = 4 * n + 2
        attack = PauliOp.single(reg, attack_qubit, "X")
        rng = RNG(seed)
        accepts = 0
        for _ in range(trials):
            script = AdversaryScript(
                transit_attacks={("cnot", ("a", "b"), POST): attack}
            )
            s = Session(2, n, rng=rng, corrupted=frozenset({2}), adversary=script)
            s.add_wire("a", 1)
            s.add_wire("b", 1)
            s.encode_all()
            s.apply_cnot("a", "b")
            accepts += not s.aborted
        return accepts / trials

    def test_post_unitary_side_attack_detection_rate(self):
        # X on a kept trap of the control side between the hidden unitary
        # and its trap test folds through that side's fresh twirl only.
        n, trials = 2, 1200
        rate = self._attacked_pair_accept(n, attack_qubit=1, trials=trials, seed=21)
        expected = float(uniform_class_accept_probability(n))
        assert abs(rate - expected) < 4 * sigma(expected, trials)

    def test_circulating_attack_detection_rate(self):
        # An attack during circulation folds through the joint hidden frame
        # and lands across both sides: both trap tests must pass, which for
        # a uniform class over 4n+2 qubits is far below a single side's rate.
        n, trials = 2, 1200
        reg = 4 * n + 2
        attack = PauliOp.single(reg, 0, "X")
        rng = RNG(22)
        accepts = 0
        for _ in range(trials):
            script = AdversaryScript(transit_attacks={("cnot", ("a", "b"), 1): attack})
            s = Session(2, n, rng=rng, corrupted=frozenset({2}), adversary=script)
            s.add_wire("a", 1)
            s.add_wire("b", 1)
            s.encode_all()
            s.apply_cnot("a", "b")
            accepts += not s.aborted
        # Both sides restrict a uniform class; joint acceptance is below the
        # single-side bound 2^-n (no tight closed form asserted here).
        assert accepts / trials <= 2**-n + 4 * sigma(2**-n, trials)

    def test_residual_propagation_through_cnot(self):
        # Accepted data flips ride along the protocol CNOT exactly like
        # plaintext errors: X on control propagates to both outputs, X on
        # target stays put.
        n = 1
        reg = 2 * n + 1
        flip = PauliOp.single(reg, 0, "X")
        ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a OUT 1\n"
            "WIRE b IN 2\nWIRE b OUT 2\nCNOT a b"
        )
        for seed in range(6):
            script = AdversaryScript(transit_attacks={("encode", "a", 0): flip})
            out = Session(2, n, rng=seed, corrupted=frozenset({1}),
                          adversary=script).run_clifford_circuit(ir)
            assert out["outputs"] == {"a": 1, "b": 1}
        for seed in range(6):
            script = AdversaryScript(transit_attacks={("encode", "b", 0): flip})
            out = Session(2, n, rng=seed, corrupted=frozenset({2}),
                          adversary=script).run_clifford_circuit(ir)
            assert out["outputs"] == {"a": 0, "b": 1}


# ---------------------------------------------------------------------------
# Authenticated measurement
# ---------------------------------------------------------------------------


class TestMeasurement:
    def test_forged_data_bit_accept_rate_is_two_to_minus_n(self):
        n, trials = 3, 3000
        rng = RNG(31)
        accepts = 0
        flipped_ok = True
        for _ in range(trials):
            script = AdversaryScript(measure_lies={"w": 1})
            s = Session(2, n, rng=rng, corrupted=frozenset({1}), adversary=script)
            s.add_wire("w", 1)
            s.encode_all()
            stored = s.measure_wire("w", "m")
            if stored is not None:
                accepts += 1
                flipped_ok &= stored == 1  # |0> plaintext reported as 1
        expected = 2.0**-n
        assert abs(accepts / trials - expected) < 4 * sigma(expected, trials)
        assert flipped_ok

    def test_trap_only_forgery_always_rejected(self):
        n = 3
        rng = RNG(32)
        for lie_traps in (1, 5, 7):
            script = AdversaryScript(measure_lies={"w": lie_traps << 1})
            s = Session(2, n, rng=rng, corrupted=frozenset({1}), adversary=script)
            s.add_wire("w", 1)
            s.encode_all()
            assert s.measure_wire("w", "m") is None
            assert s.aborted

    def test_honest_measurement_exact(self):
        for prep, want in (("zero", 0), ("one", 1)):
            s = Session(2, 2, rng=5)
            s.add_wire("w", 1, prep=prep)
            s.encode_all()
            assert s.measure_wire("w", "m") == want
            assert read_bit(s.mpc, "m") == want
            with pytest.raises(KeyErasedError):
                read_key(s.mpc, "w")

    def test_exact_lie_deviation_table(self):
        for n in (3, 4, 5):
            dev = measurement_lie_deviation(n)
            assert dev["max_deviation"] == Fraction(1, 2**n)
            assert dev["bound"] == Fraction(1, 2**n)
            for lie, value in dev["per_lie"].items():
                if lie & 1:
                    assert value == Fraction(1, 2**n)
                else:
                    assert value == 0
        skew = measurement_lie_deviation(3, weights=(Fraction(1), Fraction(0)))
        assert skew["max_deviation"] == Fraction(1, 8)

    def test_deviation_rejects_bad_weights(self):
        with pytest.raises(ConfigError):
            measurement_lie_deviation(2, weights=(Fraction(1, 2), Fraction(1, 3)))


# ---------------------------------------------------------------------------
# Decode
# ---------------------------------------------------------------------------


class TestDecode:
    def test_decode_releases_then_erases_key(self):
        s = Session(2, 2, rng=4)
        s.add_wire("w", 1)
        s.encode_all()
        assert s.decode_wire("w")
        with pytest.raises(KeyErasedError):
            read_key(s.mpc, "w")
        with pytest.raises(ProtocolViolationError):
            s.decode_wire("w")  # already decoded

    def test_post_encode_trap_flip_caught_at_decode(self):
        # A ciphertext X-attack after encoding lands on a random plaintext
        # frame; decode accepts only when the folded X-part misses every
        # trap.  Here we plant the residual directly for determinism.
        s = Session(2, 2, rng=6)
        s.add_wire("w", 1)
        s.encode_all()
        s.wires["w"].auth.trap_error = PauliOp(3, 0b010, 0, 0)
        assert not s.decode_wire("w")
        assert s.aborted and "decode-reject" in s.abort_reason


# ---------------------------------------------------------------------------
# Symbolic vs physical route agreement
# ---------------------------------------------------------------------------


class TestDualRoute:
    def test_deterministic_circuit_on_dense_backend(self):
        ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a OUT 1\n"
            "WIRE b IN 2\nWIRE b OUT 2\nCLIFF X a\nCNOT a b"
        )
        for seed in range(12):
            out = Session(2, 1, rng=seed, backend="dense").run_clifford_circuit(ir)
            assert not out["aborted"]
            assert out["outputs"] == {"a": 1, "b": 1}

    def test_uniform_circuit_on_dense_backend(self):
        ir = parse_circuit("PLAYERS 2\nWIRE w IN 1\nWIRE w OUT 1\nCLIFF H w")
        rng = RNG(43)
        hits = sum(
            Session(2, 1, rng=rng, backend="dense").run_clifford_circuit(ir)[
                "outputs"
            ]["w"]
            for _ in range(200)
        )
        assert abs(hits / 200 - 0.5) < 4 * sigma(0.5, 200)

    def test_attacked_encode_rates_agree_across_routes(self):
        n = 1
        attack = PauliOp.single(2 * n + 1, 0, "X")
        expected = float(uniform_class_accept_probability(n))  # 31/63
        rng = RNG(44)

        def run(backend, trials):
            hits = 0
            for _ in range(trials):
                script = AdversaryScript(
                    transit_attacks={("encode", "w", 1): attack}
                )
                s = Session(2, n, rng=rng, backend=backend,
                            corrupted=frozenset({2}), adversary=script)
                s.add_wire("w", 1)
                hits += bool(s.encode_all(["w"]))
            return hits / trials

        # the two routes share no folding code, so agreement validates both
        rate_symbolic = run("tableau", 600)
        rate_physical = run("dense", 350)
        assert abs(rate_symbolic - expected) < 4 * sigma(expected, 600)
        assert abs(rate_physical - expected) < 4 * sigma(expected, 350)

    def test_forged_measurement_rates_agree_across_routes(self):
        n = 1
        expected = 0.5
        rng = RNG(45)

        def run(backend, trials):
            hits = 0
            for _ in range(trials):
                script = AdversaryScript(measure_lies={"w": 1})
                s = Session(2, n, rng=rng, backend=backend,
                            corrupted=frozenset({1}), adversary=script)
                s.add_wire("w", 1)
                s.encode_all()
                hits += s.measure_wire("w", "m") is not None
            return hits / trials

        assert abs(run("tableau", 600) - expected) < 4 * sigma(expected, 600)
        assert abs(run("dense", 300) - expected) < 4 * sigma(expected, 300)

    def test_physical_stored_bit_tracks_plaintext(self):
        for prep, want in (("zero", 0), ("one", 1)):
            for seed in range(6):
                s = Session(2, 1, rng=seed, backend="dense")
                s.add_wire("w", 1, prep=prep)
                s.encode_all()
                assert s.measure_wire("w", "m") == want


# ---------------------------------------------------------------------------
# Magic-state consumption
# ---------------------------------------------------------------------------


class TestTGadget:
    def test_gadget_applies_t_exactly(self):
        # T|+> is the magic state itself: the teleported wire must answer 0
        # in the T-basis test with certainty, across both correction branches.
        branches = set()
        for seed in range(20):
            s = Session(2, 1, rng=seed, backend="authwire")
            s.add_wire("d", 1, prep="plus")
            s.add_wire("mg", 1, prep="magic_T")
            s.encode_all()
            carrier = s.t_gadget("d", "mg")
            assert not s.aborted
            branches.add(read_bit(s.mpc, "_tg0"))
            assert s.decode_wire(carrier)
            assert measure_T_basis(s.state, carrier, s.rng) == 0
        assert branches == {0, 1}

    @pytest.mark.parametrize("prep,want", [("zero", 0), ("one", 1)])
    def test_gadget_on_basis_states(self, prep, want):
        # T acts diagonally on |0>,|1>; outputs are unchanged.
        for seed in range(4):
            s = Session(2, 1, rng=seed, backend="authwire")
            s.add_wire("d", 1, prep=prep)
            s.add_wire("mg", 1, prep="magic_T")
            s.encode_all()
            carrier = s.t_gadget("d", "mg")
            assert s.decode_wire(carrier)
            assert s.state.measure_remove(carrier, s.rng)[0] == want

    def test_tableau_backend_rejects_t(self):
        s = Session(2, 1, rng=0)
        with pytest.raises(ProtocolViolationError, match="authwire or dense"):
            s.t_gadget("d", "mg")


# ---------------------------------------------------------------------------
# Abort containment and trusted-computation integration
# ---------------------------------------------------------------------------


class TestAborts:
    def test_adversary_mpc_abort_latches_run(self):
        def veto(tag, view):
            return {2: 1} if tag == "encode:verify" else {}

        ir = parse_circuit(BELL_TEXT)
        s = Session(2, 1, rng=2, corrupted=frozenset({2}),
                    adversary=AdversaryScript(mpc_abort=veto))
        out = s.run_clifford_circuit(ir)
        assert out["aborted"]
        assert out["abort_reason"] == "mpc:encode:verify"
        assert out["outputs"] == {}
        assert s.mpc.aborted

    def test_detected_attack_aborts_and_blocks_later_ops(self):
        n = 2
        script = AdversaryScript(test_lies={("encode", "w"): 1})
        s = Session(2, n, rng=3, corrupted=frozenset({1}), adversary=script)
        s.add_wire("w", 1)
        assert not s.encode_all(["w"])
        assert s.aborted
        assert s.measure_wire("w", "m") is None  # silently refuses
        with pytest.raises(KeyErasedError):
            read_key(s.mpc, "w")  # ⊥ marker stored

    def test_wire_state_machine_guards(self):
        s = Session(2, 1, rng=0)
        with pytest.raises(ProtocolViolationError, match="unknown wire"):
            s.measure_wire("nope", "m")
        s.add_wire("w", 1)
        with pytest.raises(ProtocolViolationError, match="pending"):
            s.apply_single_clifford("H", "w")
        with pytest.raises(ProtocolViolationError, match="duplicate wire"):
            s.add_wire("w", 1)


# ---------------------------------------------------------------------------
# Hidden-key sign randomization (privacy mechanism)
# ---------------------------------------------------------------------------


class TestKeyPrivacy:
    def test_sign_variants_average_every_deviation_to_zero(self):
        # Keys that share a tableau but differ in row signs are equally
        # likely; averaging any non-identity folded deviation over the sign
        # orbit gives the zero operator, so accepted deviations carry no
        # information about the plaintext.
        rng = RNG(50)
        m = 2
        for _ in range(25):
            c = random_clifford(m, rng)
            while True:
                p = PauliOp(
                    m,
                    int(rng.integers(0, 4)),
                    int(rng.integers(0, 4)),
                    0,
                )
                if not p.is_identity_class():
                    break
            acc = np.zeros((4, 4), dtype=complex)
            for signs in range(1 << (2 * m)):
                rows = tuple(
                    PauliOp(r.m, r.x, r.z, (r.phase + 2 * ((signs >> j) & 1)) % 4)
                    for j, r in enumerate(c.rows)
                )
                variant = CliffordOp(m, rows)
                acc += conjugate_pauli(variant, p).to_dense()
            assert np.max(np.abs(acc)) < 1e-12

    def test_honest_runs_never_sample_keys(self):
        ir = parse_circuit(BELL_TEXT)
        s = Session(2, 4, rng=8)
        out = s.run_clifford_circuit(ir, measure_outputs=False)
        assert not out["aborted"]
        # Lazy keys: every wire went through encode, a gate and decode with
        # no key ever materialized.
        assert all(rec.auth.key is None for rec in s.wires.values())


# ---------------------------------------------------------------------------
# Hidden linear map as a permutation unitary
# ---------------------------------------------------------------------------


class TestLinearMapClifford:
    @pytest.mark.parametrize("m", [2, 3])
    def test_dense_action_is_the_basis_permutation(self, m):
        from qmpc.gf2 import BitVec
        from qmpc.pauli_clifford import bits_of_index, index_of_bits

        rng = RNG(60)
        for _ in range(6):
            g = random_invertible(m, rng)
            c = linear_map_clifford(g)
            c.validate()
            u = to_dense(c, limit=6)
            perm = np.zeros_like(u)
            for idx in range(1 << m):
                bits = bits_of_index(idx, m)
                g_bits = g.matrix.mat_vec(BitVec(bits, m)).bits
                perm[index_of_bits(g_bits, m), idx] = 1.0
            # compare modulo a single global phase
            nz = np.argwhere(np.abs(u) > 1e-9)
            phase = u[nz[0][0], nz[0][1]] / perm[nz[0][0], nz[0][1]]
            assert np.max(np.abs(u - phase * perm)) < 1e-9


# ---------------------------------------------------------------------------
# Ideal functionalities and simulators
# ---------------------------------------------------------------------------


class TestIdealWorld:
    def test_mpqc_functionality_matches_plain_run(self):
        ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a OUT 1\nCLIFF X a"
        )
        out = ideal_functionality("mpqc", circuit=ir, rng=1)
        assert out == simulate_plain(ir, rng=2)

    def test_mpqc_abort_bit(self):
        ir = parse_circuit(BELL_TEXT)
        out = ideal_functionality("mpqc", circuit=ir, abort_bit=True)
        assert out["aborted"]
        assert out["outputs"] == {"a": "ABORT", "b": "ABORT"}

    def test_enc_and_magic_hand_back_authenticated_wires(self):
        enc = ideal_functionality("enc", wires=["u", "v"], n=3)
        assert set(enc["wires"]) == {"u", "v"}
        assert all(w.n == 3 for w in enc["wires"].values())
        magic = ideal_functionality("magic", count=4, n=2)
        assert len(magic["wires"]) == 4

    def test_clifford_functionality_keeps_outputs_encoded(self):
        ir = parse_circuit(BELL_TEXT)
        out = ideal_functionality("clifford_nodecode", circuit=ir, n=2, rng=0)
        assert set(out["wires"]) == {"a", "b"}
        t_ir = parse_circuit(
            "PLAYERS 2\nWIRE a IN 1\nWIRE a DISCARD\nT a\nMEAS a -> m"
        )
        with pytest.raises(ProtocolViolationError):
            ideal_functionality("clifford_nodecode", circuit=t_ir)

    def test_simulator_filter_rules(self):
        n, k = 2, 2
        rng = RNG(70)
        reg = 2 * n + 1
        # Trap-touching attack folded from hop 1: simulator must reject
        # whenever any trap X survives, accept otherwise.
        clean = AdversaryScript()
        out = simulate_encode_adversary(n, k, clean, "w", rng)
        assert out["accept"] and out["residual"].is_identity_class()
        z_only = AdversaryScript(
            transit_attacks={("encode", "w", 0): PauliOp(reg, 0, 0b11111, 0)}
        )
        out = simulate_encode_adversary(n, k, z_only, "w", rng)
        assert out["accept"] and out["residual"].x == 0
        data_flip = AdversaryScript(
            transit_attacks={("encode", "w", 0): PauliOp.single(reg, 0, "X")}
        )
        out = simulate_encode_adversary(n, k, data_flip, "w", rng)
        assert out["accept"] and out["residual"].x == 1
        lying = AdversaryScript(test_lies={("encode", "w"): 1})
        assert not simulate_encode_adversary(n, k, lying, "w", rng)["accept"]

        meas = simulate_measure_adversary(
            n, AdversaryScript(measure_lies={"w": 1}), "w",
            PauliOp.identity(n + 1), 0
        )
        assert not meas["accept"]
        honest = simulate_measure_adversary(
            n, AdversaryScript(), "w", PauliOp(n + 1, 1, 0, 0), 0
        )
        assert honest["accept"] and honest["bit"] == 1

        cnot = simulate_cnot_adversary(
            n, k, AdversaryScript(), ("a", "b"),
            PauliOp(n + 1, 1, 0, 0), PauliOp.identity(n + 1), rng
        )
        # X on control data propagates to the target's data slot.
        assert cnot["accept_a"] and cnot["accept_b"]
        assert cnot["residual_a"].x & 1 and cnot["residual_b"].x & 1

    def test_distinguishing_advantage_tracks_counting_gap(self):
        n, k, trials = 3, 2, 500
        reg = 2 * n + 1

        def factory(rng):
            x = int(rng.integers(0, 1 << reg))
            z = int(rng.integers(0, 1 << reg))
            if x == 0 and z == 0:
                x = 1
            hop = int(rng.integers(1, k + 1))
            return AdversaryScript(
                transit_attacks={("encode", "w", hop): PauliOp(reg, x, z, 0)}
            )

        adv = distinguishing_advantage("encode", n, k, factory, trials, rng=71)
        expected = float(
            uniform_class_accept_probability(n) - sim_accept_probability(n)
        )
        noise = 4 * (sigma(0.13, trials) + sigma(0.02, trials))
        assert abs(adv["advantage"] - expected) < noise
        assert adv["p_real"] > adv["p_ideal"]
