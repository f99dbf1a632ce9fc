"""Two interchangeable state backends behind one interface.

The stabilizer tableau tracks a Clifford-reachable state as integer bit
rows — O(poly) in qubit count, exact probabilities, but Clifford-only.
The dense statevector holds explicit amplitudes — exponential memory, but
it takes any gate.  Both expose the same preparation / gate / measurement
calls, and this script checks them against each other where they overlap.
"""

import numpy as np

from qmpc.backend import DenseState, StabilizerState, prepare
from qmpc.pauli_clifford import gate_clifford

rng = np.random.default_rng(7)

# --- the same Bell-pair experiment on both backends --------------------------
H = gate_clifford("H", (0,), 1)
CNOT = gate_clifford("CNOT", (0, 1), 2)


def bell_counts(backend: str, shots: int) -> dict:
    counts = {}
    for _ in range(shots):
        state = prepare("zero", 2, backend=backend, ids=("a", "b"))
        state.apply_clifford(H, ("a",))
        state.apply_clifford(CNOT, ("a", "b"))
        a, _ = state.measure_remove("a", rng)
        b, _ = state.measure_remove("b", rng)
        counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


for backend in ("tableau", "dense"):
    print(f"{backend:>8} Bell counts over 2000 shots:", bell_counts(backend, 2000))
print("perfect correlation, ~50/50 — on both routes\n")

# --- exact outcome probabilities without collapsing ---------------------------
state = prepare("zero", 2, backend="tableau", ids=("a", "b"))
state.apply_clifford(H, ("a",))
state.apply_clifford(CNOT, ("a", "b"))
print("tableau P[a=0] =", state.outcome_probability("a", 0))

dense = prepare("zero", 2, backend="dense", ids=("a", "b"))
dense.apply_clifford(H, ("a",))
dense.apply_clifford(CNOT, ("a", "b"))
print("  dense P[a=0] =", dense.outcome_probability("a", 0))

# --- only the dense backend takes non-Clifford gates --------------------------
dense = prepare("zero", 1, backend="dense", ids=("q",))
dense.apply_gate("H", ("q",))
dense.apply_gate("T", ("q",))
dense.apply_gate("H", ("q",))
p0 = dense.outcome_probability("q", 0)
print(f"\ndense H·T·H |0>: P[0] = {p0:.6f}  (= cos^2(pi/8) = {np.cos(np.pi/8)**2:.6f})")

# --- magic-basis preparation ---------------------------------------------------
magic = prepare("magic_T", ids=("m",))
print("magic-state amplitudes:", np.round(magic.vec, 4))

# --- forced-branch measurement drives exact enumeration ------------------------
dense = prepare("zero", 1, backend="dense", ids=("q",))
dense.apply_gate("H", ("q",))
copy = dense.copy()
_, p_zero = dense.measure_remove("q", forced=0)
_, p_one = copy.measure_remove("q", forced=1)
print(f"forced branches of H|0>: P[0] = {p_zero:.3f}, P[1] = {p_one:.3f}")
