"""Magic-state supply: cut-and-choose testing plus 15-to-1 distillation.

Non-Clifford gates consume magic states, and a dishonest preparer could
poison them.  Two defenses compose: a cut-and-choose phase where randomly
chosen copies are sacrificed and tested (a corrupted copy is caught with
hypergeometric probability), and a post-selected 15-to-1 distillation
block that drives residual error from eps down to O(eps^3).
"""

import numpy as np

from qmpc.distill import (
    create_magic_states,
    exact_block_error,
    sample_block_error,
)
from qmpc.protocol import AdversaryScript, Session

rng = np.random.default_rng(33)

# --- the cubic error suppression, exact and sampled -----------------------------
print("15-to-1 block, exact enumeration vs Monte Carlo (200k blocks):")
print(f"  {'eps':>6} {'accept':>9} {'exact out-err':>14} {'sampled':>10} {'eps^3':>9} {'50 eps^3':>9}")
for eps in (0.005, 0.01, 0.02):
    exact = exact_block_error(eps)
    mc = sample_block_error(eps, 200_000, rng)
    print(f"  {eps:>6} {exact['accept_probability']:>9.4f} "
          f"{exact['output_error']:>14.3e} {mc['output_error_rate']:>10.3e} "
          f"{eps**3:>9.1e} {50 * eps**3:>9.1e}")
print("  the exact output error sits inside [eps^3, 50 eps^3] and scales "
      "cubically\n  (at these rates the sampled column is Poisson-noisy: "
      "a few events per 200k blocks)\n")

# --- honest magic-state supply inside a session ----------------------------------
k, n, t = 3, 4, 2
session = Session(k, n, rng=rng)
wires = create_magic_states(session, t)
print(f"honest cut-and-choose (k={k}, t={t}, n={n}): prepared {(t + k) * n} copies,")
print(f"  tested {(k - 1) * n}, distilled the survivors -> "
      f"{len(wires)} authenticated magic wires, aborted: {session.aborted}\n")

# --- one poisoned copy is caught with hypergeometric probability ------------------
poison = AdversaryScript(magic_corruptions=frozenset({0}))
trials = 2000
aborts = 0
for _ in range(trials):
    session = Session(k, n, rng=rng, corrupted=frozenset({1}), adversary=poison)
    create_magic_states(session, t)
    aborts += session.aborted
p_catch = (k - 1) * n / ((t + k) * n)
print(f"one corrupted copy among {(t + k) * n}:")
print(f"  abort rate {aborts / trials:.3f} vs hypergeometric catch "
      f"probability {p_catch:.3f}")
print("  (an uncaught corrupted copy still has to survive distillation)")
