"""The classical trusted-computation layer and its abort semantics.

All secret material — authentication keys, hidden test strings, plaintext
measurement results — lives inside a small trusted-computation facade that
the players can only call, never inspect.  Corrupted players see their own
outputs first and may stop the protocol (abort with unfairness), but they
can never extract an honest player's keys or flip a stored bit.
"""

import numpy as np

from qmpc.errors import KeyErasedError
from qmpc.mpc import (
    ABORT,
    MPCState,
    erase_key,
    invoke,
    read_bit,
    read_key,
    store_bit,
    store_key,
)
from qmpc.pauli_clifford import random_clifford

rng = np.random.default_rng(4)

# --- keys live inside; the outside sees only handles ---------------------------
state = MPCState(k=3)
key = random_clifford(4, rng)
store_key(state, "wire-a", key)
print("stored a hidden 4-qubit key for wire-a;",
      "read-back is identical:", read_key(state, "wire-a") == key)

erase_key(state, "wire-a")
try:
    read_key(state, "wire-a")
except KeyErasedError as exc:
    print("after erasure:", exc)

# --- a joint computation delivers per-player outputs ----------------------------
def deal_test_string(memory, inputs):
    r = int(rng.integers(0, 8))
    outputs = {p: ("report-slot", p) for p in range(1, 4)}
    outputs[2] = ("tester", r)  # player 2 measures and must report r

    def update():
        memory[("bit", "hidden-r")] = r

    return outputs, update


result = invoke(state, "deal-test", deal_test_string)
print("\njoint call ok:", result.ok, "— player 2 got:", result.outputs[2])
print("hidden string stored:", read_bit(state, "hidden-r"),
      "(players never see this log line)")

# --- corrupted players may abort after seeing their output ----------------------
angry = MPCState(k=3, corrupted=frozenset({3}))
store_bit(angry, "x", 1)


def reveal(memory, inputs):
    return {p: memory[("bit", "x")] for p in range(1, 4)}, None


always_abort = lambda tag, view: {3: 1}  # player 3 saw its output; stops
result = invoke(angry, "reveal", reveal, adversary=always_abort)
print("\ncorrupted player aborts after seeing output:")
print("  ok:", result.ok, " honest players got:",
      {p: result.outputs[p] for p in (1, 2)}, " corrupted kept:", result.outputs[3])

# --- aborts are sticky -----------------------------------------------------------
late = invoke(angry, "anything-later", reveal)
print("  every later call returns ABORT:",
      all(v == ABORT for v in late.outputs.values()))
print("  call log:", [entry["result"] for entry in angry.log])
