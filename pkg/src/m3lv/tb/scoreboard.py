"""Scoreboard: expected retire events from the reference model, compared
in order against what the DUT actually committed."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..arch import COMPARE_FIELDS, EXC_ENTRY, EXC_RETURN_KIND, RetireEvent
from ..errors import ExpectedUnderflow
from .checker import ArchTransaction

# scoreboard field -> checker family (the four verify properties)
FIELD_FAMILY = {
    "pc": "fetch",
    "inst": "decode",
    "wb": "result",
    "flags_after": "result",
    "mem": "memory",
    "exception": "result",
}

FAMILIES = ("fetch", "decode", "result", "memory", "protocol")


def event_bins(ev: RetireEvent) -> tuple[str, ...]:
    """Coverage bins a retire event belongs to, for feature attribution."""
    if ev.inst is not None:
        return (f"opcode.{ev.inst.mnemonic.value}",)
    if ev.exception is not None:
        kind = ev.exception[0]
        if kind == EXC_ENTRY:
            return ("irq.entry", "irq.tail_chain")
        if kind == EXC_RETURN_KIND:
            return ("irq.return",)
    return ()


@dataclass(frozen=True, slots=True)
class Mismatch:
    seq: int
    field: str
    expected: object
    actual: object
    family: str
    bins: tuple[str, ...]

    def describe(self) -> str:
        return (f"seq {self.seq} {self.field}: expected {self.expected!r}, "
                f"got {self.actual!r}")


class Scoreboard:
    def __init__(self):
        self.expected: deque[RetireEvent] = deque()
        self.mismatches: list[Mismatch] = []

    def push(self, event: RetireEvent) -> None:
        self.expected.append(event)

    def compare(self, txn: ArchTransaction) -> Mismatch | None:
        """Check the transaction against the head expected event.

        The FIFO advances whether or not the comparison passes; the first
        differing field is recorded.
        """
        if not self.expected:
            raise ExpectedUnderflow(
                f"DUT retired seq {txn.event.seq} with no expected event")
        exp = self.expected.popleft()
        act = txn.event
        for name in COMPARE_FIELDS:
            e, a = getattr(exp, name), getattr(act, name)
            if e != a:
                mm = Mismatch(act.seq, name, e, a,
                              FIELD_FAMILY[name], event_bins(exp))
                self.mismatches.append(mm)
                return mm
        return None
