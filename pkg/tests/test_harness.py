"""Harness and CLI tests: config parsing (includes, overrides, typed
errors), record emission round-trips and deterministic layout, the uniform
pass policy and exit codes, reproducibility, the file-level circuit
contract, every named experiment at smoke scale, and the command-line
entry points."""

import json

import numpy as np
import pytest

from qmpc.cli import main
from qmpc.errors import ConfigError, PartitionViolationError
from qmpc.harness import (
    BUILTIN_CIRCUITS,
    EXPERIMENTS,
    FIELD_ORDER,
    ExperimentConfig,
    ResultRecord,
    builtin_circuit,
    emit,
    exit_code,
    named_adversary,
    parse_circuit,
    parse_config,
    plain_outcome_distribution,
    read_records,
    run_experiment,
    verification_suite,
    wilson_halfwidth,
)
from qmpc.protocol import parse_circuit as parse_circuit_text
from qmpc.protocol import simulate_plain


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def test_config_validation_rejects_bad_fields():
    ExperimentConfig(experiment="gl-twirl").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", k=1).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", n=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", trials=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", backend="qasm").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", format="xml").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", protocol="teleport").validate()


def test_config_corrupted_must_be_proper_subset():
    ok = ExperimentConfig(experiment="gl-twirl", k=3, corrupted=frozenset({1, 2}))
    ok.validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(
            experiment="gl-twirl", k=3, corrupted=frozenset({1, 2, 3})
        ).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="gl-twirl", k=3, corrupted=frozenset({4})).validate()


def test_parse_config_reads_typed_keys(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(
        "# comment line\n"
        "experiment = pauli-detection\n"
        "k = 4\n"
        "n = 6\n"
        "trials = 250\n"
        "seed = 17\n"
        "eps = 0.02\n"
        "corrupted = 1,3\n"
        "backend = dense\n"
    )
    cfg = parse_config(cfg_file)
    assert cfg.experiment == "pauli-detection"
    assert (cfg.k, cfg.n, cfg.trials, cfg.seed) == (4, 6, 250, 17)
    assert cfg.eps == pytest.approx(0.02)
    assert cfg.corrupted == frozenset({1, 3})
    assert cfg.backend == "dense"


def test_parse_config_include_and_precedence(tmp_path):
    (tmp_path / "base.cfg").write_text("k = 3\nn = 4\ntrials = 100\n")
    (tmp_path / "run.cfg").write_text(
        "include base.cfg\nexperiment = gl-twirl\nn = 2\n"
    )
    cfg = parse_config(tmp_path / "run.cfg")
    assert (cfg.k, cfg.n, cfg.trials) == (3, 2, 100)


def test_parse_config_include_cycle_detected(tmp_path):
    (tmp_path / "a.cfg").write_text("include b.cfg\n")
    (tmp_path / "b.cfg").write_text("include a.cfg\n")
    with pytest.raises(ConfigError, match="cycle"):
        parse_config(tmp_path / "a.cfg")


def test_parse_config_unknown_key_names_file_and_line(tmp_path):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("experiment = gl-twirl\nbogus = 1\n")
    with pytest.raises(ConfigError, match=r"bad\.cfg:2.*bogus"):
        parse_config(cfg_file)


def test_parse_config_bad_int_and_missing_experiment(tmp_path):
    f = tmp_path / "a.cfg"
    f.write_text("experiment = gl-twirl\ntrials = lots\n")
    with pytest.raises(ConfigError, match=r"a\.cfg:2"):
        parse_config(f)
    g = tmp_path / "b.cfg"
    g.write_text("k = 3\n")
    with pytest.raises(ConfigError, match="experiment"):
        parse_config(g)


def test_parse_config_overrides_win(tmp_path):
    f = tmp_path / "a.cfg"
    f.write_text("experiment = gl-twirl\nn = 2\ntrials = 300\n")
    cfg = parse_config(f, overrides={"trials": 42, "seed": 9, "out": None})
    assert (cfg.trials, cfg.seed, cfg.n) == (42, 9, 2)


def test_parse_config_resolves_circuit_relative_to_config(tmp_path):
    (tmp_path / "c.txt").write_text("PLAYERS 2\n")
    f = tmp_path / "a.cfg"
    f.write_text("experiment = honest-correctness\ncircuit = c.txt\n")
    cfg = parse_config(f)
    assert cfg.circuit == str(tmp_path / "c.txt")


# ---------------------------------------------------------------------------
# Records, emission, exit codes
# ---------------------------------------------------------------------------


def _demo_records():
    return [
        ResultRecord(
            experiment="measurement-trick", trial=0,
            parameters={"n": 3, "k": 3}, estimate=0.125,
            ci99_halfwidth=0.0, bound=0.125,
            bound_source="report-forgery ceiling 2^-n", passed=True,
            wall_clock_s=0.001,
        ),
        ResultRecord(
            experiment="measurement-trick", trial=1,
            parameters={"n": 3, "k": 3}, estimate=0.3,
            ci99_halfwidth=0.01, bound=0.125,
            bound_source="report-forgery ceiling 2^-n", passed=False,
            wall_clock_s=0.001,
        ),
    ]


def test_emit_jsonl_round_trip_and_field_order(tmp_path):
    records = _demo_records()
    out = tmp_path / "r.jsonl"
    emit(records, out, "jsonl")
    assert read_records(out, "jsonl") == records
    first = json.loads(out.read_text().splitlines()[0])
    assert list(first) == list(FIELD_ORDER)


def test_emit_csv_round_trip(tmp_path):
    records = _demo_records()
    out = tmp_path / "r.csv"
    emit(records, out, "csv")
    assert read_records(out, "csv") == records
    header = out.read_text().splitlines()[0]
    assert header == ",".join(FIELD_ORDER)


def test_emit_empty_records_writes_empty_file(tmp_path):
    out = tmp_path / "empty.jsonl"
    emit([], out, "jsonl")
    assert out.read_text() == ""
    assert read_records(out, "jsonl") == []


def test_exit_code_zero_iff_all_pass():
    records = _demo_records()
    assert exit_code([records[0]]) == 0
    assert exit_code(records) == 1
    assert exit_code([]) == 0


def test_emit_is_deterministic(tmp_path):
    records = _demo_records()
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    emit(records, a, "jsonl")
    emit(records, b, "jsonl")
    assert a.read_bytes() == b.read_bytes()


def test_wilson_halfwidth_basic_properties():
    assert wilson_halfwidth(0.5, 0) == 1.0
    # Shrinks with trials, covers the estimator's own noise scale.
    h1, h2 = wilson_halfwidth(0.3, 100), wilson_halfwidth(0.3, 10_000)
    assert h2 < h1
    assert h2 > np.sqrt(0.3 * 0.7 / 10_000)  # z > 1


# ---------------------------------------------------------------------------
# File-level circuit contract
# ---------------------------------------------------------------------------


def test_parse_circuit_empty_gate_list_is_identity(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("PLAYERS 2\n")
    circuit = parse_circuit(f)
    assert circuit.k == 2 and circuit.gates == ()


def test_parse_circuit_in_one_player_out_another(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("PLAYERS 3\nWIRE a IN 1\nWIRE a OUT 2\n")
    circuit = parse_circuit(f)
    assert circuit.input_of == {"a": 1}
    assert circuit.output_of == {"a": 2}


def test_parse_circuit_duplicate_input_is_partition_violation(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("PLAYERS 3\nWIRE a IN 1\nWIRE a IN 2\n")
    with pytest.raises(PartitionViolationError):
        parse_circuit(f)


def test_parse_circuit_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_circuit(tmp_path / "nope.txt")


def test_builtin_circuits_all_parse_and_validate():
    for name in BUILTIN_CIRCUITS:
        for k in (2, 4):
            text = builtin_circuit(name, k)
            circuit = parse_circuit_text(text)
            assert circuit.k == k


# ---------------------------------------------------------------------------
# Exact reference distribution
# ---------------------------------------------------------------------------


def test_plain_distribution_bell_is_correlated_half_half():
    circuit = parse_circuit_text(builtin_circuit("bell", 2))
    dist = plain_outcome_distribution(circuit)
    assert len(dist) == 2
    for (meas, outs), p in dist.items():
        labels = dict(meas)
        assert labels["ma"] == labels["mb"]
        assert p == pytest.approx(0.5)


def test_plain_distribution_matches_sampled_reference():
    text = (
        "PLAYERS 2\n"
        "WIRE a IN 1\nWIRE b IN 2\n"
        "WIRE a DISCARD\nWIRE b OUT 1\n"
        "CLIFF H a\n"
        "MEAS a -> m\n"
        "CLIFF X b ctrl=m\n"
    )
    circuit = parse_circuit_text(text)
    dist = plain_outcome_distribution(circuit)
    assert sum(dist.values()) == pytest.approx(1.0)
    # The classically-controlled X copies m into the output bit.
    for (meas, outs), p in dist.items():
        assert dict(meas)["m"] == dict(outs)["b"]
        assert p == pytest.approx(0.5)
    rng = np.random.default_rng(3)
    counts = {}
    for _ in range(600):
        res = simulate_plain(circuit, rng=rng)
        key = (tuple(sorted(res["meas"].items())),
               tuple(sorted(res["outputs"].items())))
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) == set(dist)


def test_plain_distribution_t_gate_circuit():
    text = (
        "PLAYERS 2\n"
        "WIRE a IN 1\nWIRE a DISCARD\n"
        "CLIFF H a\nT a\nCLIFF H a\nMEAS a -> m\n"
    )
    dist = plain_outcome_distribution(parse_circuit_text(text))
    # H T H |0> measures 0 with probability cos^2(pi/8).
    probs = {dict(meas)["m"]: p for (meas, outs), p in dist.items()}
    assert probs[0] == pytest.approx(np.cos(np.pi / 8) ** 2, abs=1e-12)
    assert probs[1] == pytest.approx(np.sin(np.pi / 8) ** 2, abs=1e-12)


# ---------------------------------------------------------------------------
# Experiments: contract examples and smoke coverage
# ---------------------------------------------------------------------------


def test_rounds_count_contract_example_k4_three_cnots():
    cfg = ExperimentConfig(experiment="rounds-count", k=4, circuit="cnot3")
    rec = run_experiment(cfg)[0]
    assert rec.bound == 4 + 3 * (4 + 2)
    assert rec.estimate <= rec.bound
    assert rec.passed


def test_honest_correctness_bell_contract_example():
    cfg = ExperimentConfig(
        experiment="honest-correctness", k=3, n=4, trials=3000, seed=2,
        circuit="bell",
    )
    rec = run_experiment(cfg)[0]
    assert rec.estimate < 0.05
    assert rec.passed


def test_gl_twirl_contract_example_n2():
    cfg = ExperimentConfig(experiment="gl-twirl", n=2, trials=1500, seed=0)
    rec = run_experiment(cfg)[0]
    assert rec.bound == pytest.approx(12 * 2 ** (-1.0))
    assert rec.estimate <= rec.bound
    assert rec.passed


def test_run_experiment_unknown_name_lists_known():
    with pytest.raises(ConfigError, match="gl-twirl"):
        run_experiment(ExperimentConfig(experiment="warp-drive"))


def test_run_experiment_sorts_and_stamps_records(tmp_path):
    out = tmp_path / "r.jsonl"
    cfg = ExperimentConfig(
        experiment="distill-quality", eps=0.02, trials=20_000, seed=4,
        out=str(out),
    )
    records = run_experiment(cfg)
    assert [r.trial for r in records] == sorted(r.trial for r in records)
    assert all(r.experiment == "distill-quality" for r in records)
    assert all(r.wall_clock_s == records[0].wall_clock_s for r in records)
    assert read_records(out, "jsonl") == records


def test_run_experiment_reproducible_modulo_wall_clock():
    cfg = ExperimentConfig(experiment="pauli-detection", n=3, trials=400, seed=11)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    strip = lambda r: {**r.to_dict(), "wall_clock_s": None}
    assert [strip(r) for r in a] == [strip(r) for r in b]


def test_every_record_cites_a_bound_source():
    cfg = ExperimentConfig(experiment="measurement-trick", n=4)
    for rec in run_experiment(cfg):
        assert rec.bound_source.strip()


def test_honest_correctness_rejects_t_circuit_on_tableau(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("PLAYERS 2\nWIRE a IN 1\nWIRE a DISCARD\nT a\nMEAS a -> m\n")
    cfg = ExperimentConfig(
        experiment="honest-correctness", circuit=str(f), trials=5,
        backend="tableau",
    )
    with pytest.raises(ConfigError, match="backend"):
        run_experiment(cfg)


def test_pauli_detection_smoke():
    cfg = ExperimentConfig(experiment="pauli-detection", n=3, trials=600, seed=1)
    rec = run_experiment(cfg)[0]
    assert rec.bound == pytest.approx(0.25)
    assert rec.passed


def test_filter_equivalence_smoke():
    cfg = ExperimentConfig(experiment="filter-equivalence", trials=2, seed=0)
    rec = run_experiment(cfg)[0]
    assert rec.estimate < 1e-9
    assert rec.passed


def test_measurement_trick_exact():
    cfg = ExperimentConfig(experiment="measurement-trick", n=6)
    rec = run_experiment(cfg)[0]
    assert rec.estimate == pytest.approx(2.0**-6)
    assert rec.passed


def test_distinguish_smoke_all_adversaries():
    for adversary in ("pauli-data-x", "lying-tester"):
        cfg = ExperimentConfig(
            experiment="distinguish", adversary=adversary, protocol="measure",
            n=4, trials=300, seed=5,
        )
        rec = run_experiment(cfg)[0]
        assert rec.passed, adversary


def test_magic_cut_and_choose_matches_catch_probability():
    cfg = ExperimentConfig(
        experiment="magic-cut-and-choose", k=3, t=2, n=4, trials=1500, seed=8,
    )
    upper, lower = run_experiment(cfg)
    p_catch = (3 - 1) * 4 / ((2 + 3) * 4)
    assert upper.bound == pytest.approx(p_catch)
    assert upper.passed and lower.passed
    assert abs(upper.estimate - p_catch) <= upper.ci99_halfwidth


def test_magic_cut_and_choose_requires_outputs():
    cfg = ExperimentConfig(experiment="magic-cut-and-choose", t=0, trials=5)
    with pytest.raises(ConfigError, match="t >= 1"):
        run_experiment(cfg)


def test_named_adversary_rejects_unknown():
    with pytest.raises(ConfigError, match="unknown adversary"):
        named_adversary("ghost", "encode", 3, 2)
    with pytest.raises(ConfigError, match="phase"):
        named_adversary("pauli-random", "swap", 3, 2)


def test_named_adversary_scripts_have_expected_shape():
    rng = np.random.default_rng(0)
    script = named_adversary("pauli-random", "encode", 3, 2)(rng)
    ((phase, wire, hop), pauli), = script.transit_attacks.items()
    assert phase == "encode" and wire == "w"
    assert pauli.m == 2 * 3 + 1
    script = named_adversary("lying-tester", "cnot", 3, 2)(rng)
    ((phase, wire), lie), = script.test_lies.items()
    assert phase == "cnot" and wire == "a" and 1 <= lie < 8
    script = named_adversary("pauli-data-x", "measure", 3, 2)(rng)
    assert script.measure_lies == {"w": 1}


def test_verification_suite_covers_every_experiment():
    configs = verification_suite(seed=3)
    assert {c.experiment for c in configs} == set(EXPERIMENTS)
    assert all(c.seed == 3 for c in configs)
    capped = verification_suite(seed=3, overrides={"trials": 7})
    assert all(c.trials == 7 for c in capped)


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------


def test_cli_run_passes_and_writes_records(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = rounds-count\nk = 4\ncircuit = cnot3\n")
    out = tmp_path / "r.jsonl"
    code = main(["run", str(cfg), "--out", str(out)])
    assert code == 0
    assert "[PASS] rounds-count" in capsys.readouterr().out
    records = read_records(out, "jsonl")
    assert len(records) == 1 and records[0].passed


def test_cli_run_honors_override_flags(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = measurement-trick\nn = 3\n")
    out = tmp_path / "r.jsonl"
    assert main(["run", str(cfg), "--n", "5", "--out", str(out)]) == 0
    rec = read_records(out, "jsonl")[0]
    assert rec.parameters["n"] == 5
    assert rec.estimate == pytest.approx(2.0**-5)


def test_cli_run_csv_format(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = measurement-trick\nn = 4\n")
    out = tmp_path / "r.csv"
    assert main(["run", str(cfg), "--out", str(out), "--format", "csv"]) == 0
    assert read_records(out, "csv")[0].estimate == pytest.approx(2.0**-4)


def test_cli_config_error_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment = warp-drive\n")
    assert main(["run", str(cfg)]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_cli_circuit_check(tmp_path, capsys):
    good = tmp_path / "good.txt"
    good.write_text("PLAYERS 3\nWIRE a IN 1\nWIRE a DISCARD\nMEAS a -> m\n")
    assert main(["circuit", "check", str(good)]) == 0
    assert "OK: 3 players" in capsys.readouterr().out
    bad = tmp_path / "bad.txt"
    bad.write_text("PLAYERS 3\nWIRE a IN 1\nWIRE a IN 2\n")
    assert main(["circuit", "check", str(bad)]) == 2


def test_cli_usage_error_exits_2(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_cli_bound_violation_exits_1(tmp_path, monkeypatch):
    # Force a failing record by shrinking a bound through the registry.
    import qmpc.harness as harness_mod

    def failing(cfg, rng):
        return [{
            "trial": 0, "parameters": {}, "estimate": 1.0,
            "ci99_halfwidth": 0.0, "bound": 0.5,
            "bound_source": "synthetic bound for the exit-code path",
        }]

    monkeypatch.setitem(harness_mod.EXPERIMENTS, "measurement-trick", failing)
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = measurement-trick\n")
    assert main(["run", str(cfg)]) == 1
