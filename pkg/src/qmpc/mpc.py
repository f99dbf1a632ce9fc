"""In-process trusted classical computation with abort and persistent memory.

Models the ideal classical k-party functionality the protocols rely on:
a stateful black box that computes functions of its memory and the
players' inputs, delivers outputs to corrupted players first, lets each
corrupted player veto delivery to honest players (abort with unfairness),
and keeps authentication keys, pads, and measurement records in a memory
that survives across invocations.  Erased keys are unrecoverable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import KeyErasedError, ProtocolViolationError

ABORT = "ABORT"


class _Sentinel:
    def __init__(self, label: str) -> None:
        self.label = label

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<{self.label}>"


ERASED = _Sentinel("key-erased")
REJECTED = _Sentinel("wire-rejected")


@dataclass
class MPCState:
    """One protocol session's trusted-computation state."""

    k: int
    corrupted: frozenset[int] = frozenset()
    memory: dict = field(default_factory=dict)
    aborted: bool = False
    call_count: int = 0
    log: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ProtocolViolationError("need at least 2 players")
        bad = [p for p in self.corrupted if not 1 <= p <= self.k]
        if bad:
            raise ProtocolViolationError(f"corrupted ids out of range: {bad}")
        if len(self.corrupted) >= self.k:
            raise ProtocolViolationError("at least one player must be honest")


@dataclass(frozen=True)
class MPCResult:
    ok: bool
    outputs: dict


def invoke(
    state: MPCState,
    tag: str,
    compute: Callable[[dict, dict], tuple[dict, Callable[[], None] | None]],
    player_inputs: dict | None = None,
    adversary: Callable[[str, dict], dict] | None = None,
) -> MPCResult:
    """One trusted-computation round.

    ``compute(memory, inputs)`` returns (per-player outputs, memory-update
    thunk).  Corrupted players see their outputs first and return abort
    bits via ``adversary``; any set bit suppresses the memory update and
    delivers ABORT to the honest players.  After a session aborts once,
    every later invocation returns ABORT to everyone.
    """
    state.call_count += 1
    ordinal = state.call_count
    if state.aborted:
        state.log.append(
            {"type": "mpc-call", "ordinal": ordinal, "tag": tag,
             "result": "already-aborted"}
        )
        return MPCResult(False, {p: ABORT for p in range(1, state.k + 1)})

    outputs, update = compute(state.memory, player_inputs or {})
    if adversary is not None and state.corrupted:
        corrupted_view = {p: outputs.get(p) for p in state.corrupted}
        abort_bits = {p: 0 for p in state.corrupted}
        returned = adversary(tag, corrupted_view) or {}
        for p, bit in returned.items():
            if p not in state.corrupted:
                raise ProtocolViolationError(
                    f"abort bit from non-corrupted player {p}"
                )
            abort_bits[p] = 1 if bit else 0
        if any(abort_bits.values()):
            state.aborted = True
            state.log.append(
                {"type": "mpc-call", "ordinal": ordinal, "tag": tag,
                 "result": "abort",
                 "abort_bits": dict(sorted(abort_bits.items()))}
            )
            final = {
                p: (corrupted_view[p] if p in state.corrupted else ABORT)
                for p in range(1, state.k + 1)
            }
            return MPCResult(False, final)

    if update is not None:
        update()
    state.log.append({"type": "mpc-call", "ordinal": ordinal, "tag": tag,
                      "result": "ok"})
    return MPCResult(True, outputs)


def mark_aborted(state: MPCState) -> None:
    """Latch the session into the aborted state (e.g. failed public test)."""
    state.aborted = True


# ---------------------------------------------------------------------------
# Memory accessors
# ---------------------------------------------------------------------------


def store_key(state: MPCState, wire, key) -> None:
    state.memory[("key", wire)] = key


def read_key(state: MPCState, wire):
    slot = ("key", wire)
    if slot not in state.memory:
        raise ProtocolViolationError(f"no key stored for wire {wire!r}")
    value = state.memory[slot]
    if value is ERASED:
        raise KeyErasedError(f"key for wire {wire!r} was erased")
    if value is REJECTED:
        raise KeyErasedError(f"wire {wire!r} was rejected; key holds the ⊥ marker")
    return value


def erase_key(state: MPCState, wire) -> None:
    if ("key", wire) not in state.memory:
        raise ProtocolViolationError(f"no key stored for wire {wire!r}")
    state.memory[("key", wire)] = ERASED


def reject_wire(state: MPCState, wire) -> None:
    """Store the ⊥ marker for a wire whose public test failed."""
    state.memory[("key", wire)] = REJECTED


def wire_rejected(state: MPCState, wire) -> bool:
    return state.memory.get(("key", wire)) is REJECTED


def store_bit(state: MPCState, label: str, bit: int) -> None:
    state.memory[("bit", label)] = int(bit)


def read_bit(state: MPCState, label: str) -> int:
    slot = ("bit", label)
    if slot not in state.memory:
        raise ProtocolViolationError(
            f"measurement record {label!r} not present in memory"
        )
    return state.memory[slot]


def has_bit(state: MPCState, label: str) -> bool:
    return ("bit", label) in state.memory
