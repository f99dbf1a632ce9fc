"""Symplectic Pauli/Clifford algebra: the arithmetic everything else rides on.

A Pauli on m qubits is two m-bit masks (X part, Z part) plus a power of i;
a Clifford is the symplectic table of where it sends each X_i and Z_i
generator.  Conjugation, composition, inversion, uniform sampling, and
synthesis into elementary gates are all exact bit operations — no floating
point until you explicitly ask for a dense matrix.
"""

import numpy as np

from qmpc.pauli_clifford import (
    CliffordOp,
    PauliOp,
    compose,
    conjugate_pauli,
    gate_clifford,
    inverse,
    random_clifford,
    synthesize,
    to_dense,
)

# --- Paulis are bit masks ---------------------------------------------------
p = PauliOp(3, x=0b101, z=0b011, phase=0)  # X on qubits 0,2; Z on 0,1 -> Y.Z.X
q = PauliOp.single(3, 1, "X")
print("p            =", p)
print("q            =", q)
print("p * q        =", p.mul(q))
print("q * p        =", q.mul(p),
      " (they", "commute" if p.commutes_with(q) else "anticommute", ")")
print("as letters   : p =", p.to_text(), " q =", q.to_text())

# --- Cliffords conjugate Paulis, exactly ------------------------------------
h = gate_clifford("H", (0,), 1)
s = gate_clifford("S", (0,), 1)
print("\nH X H^-1     =", conjugate_pauli(h, PauliOp.single(1, 0, "X")))
print("S X S^-1     =", conjugate_pauli(s, PauliOp.single(1, 0, "X")), " (= Y)")

# --- group structure ---------------------------------------------------------
rng = np.random.default_rng(1)
c = random_clifford(3, rng)
d = random_clifford(3, rng)
cd = compose(c, d)
assert conjugate_pauli(cd, p) == conjugate_pauli(c, conjugate_pauli(d, p))
assert compose(c, inverse(c)) == CliffordOp.identity(3)
print("\ncomposition and inversion check out on random 3-qubit Cliffords")

# --- synthesis round-trip ----------------------------------------------------
gates = synthesize(c).gates
print(f"synthesized a random Clifford into {len(gates)} elementary gates:")
print("  first ten:", gates[:10])

u_direct = to_dense(c)
u_gates = to_dense(synthesize(c))
phase = u_direct.conj().ravel() @ u_gates.ravel() / 8
assert np.allclose(u_gates, phase * u_direct, atol=1e-9)
print("gate-list unitary matches the table's dense form up to global phase")

# --- uniformity spot check ---------------------------------------------------
counts = {}
for _ in range(3000):
    img = conjugate_pauli(random_clifford(1, rng), PauliOp.single(1, 0, "Z"))
    counts[str(img)] = counts.get(str(img), 0) + 1
print("\nimage of Z under 3000 random 1-qubit Cliffords (6 cosets, ~500 each):")
for name in sorted(counts):
    print(f"  {name:>4}: {counts[name]}")
