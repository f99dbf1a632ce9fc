"""Command-line front end for the experiment harness.

Subcommands:
    ``qmpc run <config> [flags]``
        Runs the experiment described by a flat key=value config file.
    ``qmpc verify-all [--seed S] [flags]``
        Runs every named experiment at CI-scale presets.
    ``qmpc circuit check <file>``
        Parses and partition-validates a circuit file.

Shared flags (``run`` and ``verify-all``) override config/preset keys:
``--seed``, ``--trials``, ``--n``, ``--k``, ``--backend``, ``--out``,
``--format``.

Exit codes: 0 all bounds pass, 1 a bound failed, 2 configuration or
usage error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import QmpcError
from .harness import (
    emit,
    exit_code,
    parse_circuit,
    parse_config,
    run_experiment,
    verification_suite,
)

__all__ = ["main"]


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="random seed (overrides the config)")
    parser.add_argument("--trials", type=int, default=None,
                        help="trial count (overrides the config)")
    parser.add_argument("--n", type=int, default=None,
                        help="traps per authenticated qubit")
    parser.add_argument("--k", type=int, default=None, help="player count")
    parser.add_argument("--backend", choices=("tableau", "dense", "authwire"),
                        default=None, help="state backend")
    parser.add_argument("--out", default=None, help="write records to this path")
    parser.add_argument("--format", choices=("jsonl", "csv"), default=None,
                        help="record file format (default jsonl)")


def _overrides(args: argparse.Namespace) -> dict:
    return {
        key: getattr(args, key)
        for key in ("seed", "trials", "n", "k", "backend", "out", "format")
    }


def _print_records(records) -> None:
    for r in records:
        status = "PASS" if r.passed else "FAIL"
        print(
            f"[{status}] {r.experiment} trial={r.trial} "
            f"estimate={r.estimate:.6g} bound={r.bound:.6g} "
            f"ci99={r.ci99_halfwidth:.3g} ({r.wall_clock_s:.3f}s)"
        )


def _cmd_run(args: argparse.Namespace) -> int:
    config = parse_config(args.config, _overrides(args))
    records = run_experiment(config)
    _print_records(records)
    return exit_code(records)


def _cmd_verify_all(args: argparse.Namespace) -> int:
    over = _overrides(args)
    out, fmt = over.pop("out"), over.pop("format")
    seed = over.pop("seed")
    configs = verification_suite(seed if seed is not None else 0, over)
    all_records = []
    for config in configs:
        records = run_experiment(config)
        _print_records(records)
        all_records.extend(records)
    if out:
        emit(all_records, out, fmt or "jsonl")
    code = exit_code(all_records)
    total = len(all_records)
    passed = sum(r.passed for r in all_records)
    print(f"{passed}/{total} records passed")
    return code


def _cmd_circuit_check(args: argparse.Namespace) -> int:
    circuit = parse_circuit(args.file)
    print(
        f"OK: {circuit.k} players, {len(circuit.wires)} wires, "
        f"{len(circuit.gates)} gates"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qmpc",
        description="statistical verification harness for the "
        "authenticated multi-party computation stack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config", help="flat key=value config file")
    _add_override_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_verify = sub.add_parser("verify-all",
                              help="run every experiment at CI-scale presets")
    _add_override_flags(p_verify)
    p_verify.set_defaults(fn=_cmd_verify_all)

    p_circ = sub.add_parser("circuit", help="circuit file utilities")
    circ_sub = p_circ.add_subparsers(dest="circuit_command", required=True)
    p_check = circ_sub.add_parser("check", help="parse and validate a circuit file")
    p_check.add_argument("file")
    p_check.set_defaults(fn=_cmd_circuit_check)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors already
        return int(exc.code or 0)

    try:
        return args.fn(args)
    except QmpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
