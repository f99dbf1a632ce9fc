"""The verification harness: named experiments, records, and the CLI.

Every quantitative security claim in this package is wired into a named
experiment: seeded, bound-checked, and emitted as machine-readable records.
This script runs a few of them through the library API — the same calls the
``qmpc`` command line makes — and prints the resulting records.

Equivalent shell usage:
    qmpc run my.cfg --seed 7 --out records.jsonl
    qmpc verify-all --seed 0
    qmpc circuit check my_circuit.txt
"""

import json
import tempfile
from pathlib import Path

from qmpc.harness import (
    EXPERIMENTS,
    ExperimentConfig,
    emit,
    exit_code,
    parse_config,
    run_experiment,
)

print("named experiments:", ", ".join(sorted(EXPERIMENTS)), "\n")

# --- run a few experiments straight from configs --------------------------------
for cfg in (
    ExperimentConfig(experiment="honest-correctness", trials=1500, seed=7,
                     circuit="bell"),
    ExperimentConfig(experiment="pauli-detection", n=4, trials=2000, seed=7),
    ExperimentConfig(experiment="rounds-count", k=4, circuit="cnot3"),
    ExperimentConfig(experiment="distinguish", adversary="lying-tester",
                     protocol="encode", n=5, trials=800, seed=7),
):
    for rec in run_experiment(cfg):
        flag = "PASS" if rec.passed else "FAIL"
        print(f"[{flag}] {rec.experiment}: estimate {rec.estimate:.5f} "
              f"vs bound {rec.bound:.5f} (+/- {rec.ci99_halfwidth:.4f})")
        print(f"       source: {rec.bound_source[:72]}...")

# --- records round-trip through files --------------------------------------------
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "records.jsonl"
    records = run_experiment(
        ExperimentConfig(experiment="measurement-trick", n=5, out=str(out))
    )
    print("\nemitted", out.name, "->", json.loads(out.read_text())["experiment"],
          "| exit code", exit_code(records))

    # config files are flat key=value with includes
    base = Path(tmp) / "base.cfg"
    base.write_text("k = 3\nn = 4\nseed = 42\n")
    cfg_file = Path(tmp) / "exp.cfg"
    cfg_file.write_text("include base.cfg\nexperiment = gl-twirl\nn = 2\ntrials = 800\n")
    cfg = parse_config(cfg_file)
    rec = run_experiment(cfg)[0]
    print(f"from config file: {rec.experiment} estimate {rec.estimate:.3f} "
          f"<= bound {rec.bound:.3f} -> {'PASS' if rec.passed else 'FAIL'}")
