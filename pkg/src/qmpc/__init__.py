"""Simulator and statistical verification harness for authenticated
multi-party quantum computation with classical coordination.

Layers, bottom up:

- :mod:`qmpc.gf2` — bit-packed GF(2) linear algebra.
- :mod:`qmpc.pauli_clifford` — Pauli/Clifford group algebra in tableau form.
- :mod:`qmpc.backend` — stabilizer, dense, and symbolic authenticated-wire
  state backends.
- :mod:`qmpc.authcode` — trap-augmented Clifford authentication code, Pauli
  filters, and the invertible-map twirl distance.
- :mod:`qmpc.mpc` — the trusted classical coordinator abstraction.
- :mod:`qmpc.protocol` — the interactive protocols (encoding, gates,
  measurement, decoding, full circuit runs), adversary injection, ideal
  functionalities, simulators, and round accounting.
- :mod:`qmpc.distill` — magic-state creation and 15-to-1 distillation.
- :mod:`qmpc.harness` / :mod:`qmpc.cli` — named statistical experiments and
  the ``qmpc`` command line.
"""

__version__ = "0.1.0"
