"""Architectural state and the retire-event record.

RetireEvent is the unit of scoreboard comparison: the pipelined core and
the reference model emit the same schema, so equality is field-for-field.
Flags travel as a 4-bit nibble (N=8, Z=4, C=2, V=1).  The memory effect
is a single (kind, addr, size, data) tuple; exception entry/return events
carry mem=None because their stack-frame traffic is validated against the
bus transfer stream by the checker instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .isa import Instruction, MASK32

SP = 13
LR = 14
PC = 15

FLAG_N = 8
FLAG_Z = 4
FLAG_C = 2
FLAG_V = 1

# thread mode, main stack, no FP context — the only return token we model
EXC_RETURN = 0xFFFFFFF9

# context frame pushed on exception entry, lowest address first
FRAME_REGS = (0, 1, 2, 3, 12, LR)
FRAME_WORDS = 8
FRAME_BYTES = FRAME_WORDS * 4

EXC_ENTRY = "entry"
EXC_RETURN_KIND = "return"
EXC_FAULT = "fault"
HARDFAULT_NUM = 3


def pack_flags(n: bool, z: bool, c: bool, v: bool) -> int:
    return (FLAG_N if n else 0) | (FLAG_Z if z else 0) \
        | (FLAG_C if c else 0) | (FLAG_V if v else 0)


def flags_str(apsr: int) -> str:
    return "".join(name if apsr & bit else name.lower()
                   for name, bit in (("N", FLAG_N), ("Z", FLAG_Z),
                                     ("C", FLAG_C), ("V", FLAG_V)))


class ArchState:
    """Register file r0-r15 (r13=SP, r14=LR, r15=PC), APSR nibble, IPSR."""

    __slots__ = ("r", "apsr", "ipsr", "halted")

    def __init__(self):
        self.r = [0] * 16
        self.apsr = 0
        self.ipsr = 0
        self.halted = False

    def copy(self) -> "ArchState":
        s = ArchState.__new__(ArchState)
        s.r = self.r[:]
        s.apsr = self.apsr
        s.ipsr = self.ipsr
        s.halted = self.halted
        return s

    @property
    def pc(self) -> int:
        return self.r[PC]

    @pc.setter
    def pc(self, value: int) -> None:
        self.r[PC] = value & MASK32

    @property
    def sp(self) -> int:
        return self.r[SP]

    def xpsr(self) -> int:
        return (self.apsr << 28) | (self.ipsr & 0x1FF)

    def __repr__(self) -> str:
        regs = " ".join(f"r{i}={v:08x}" for i, v in enumerate(self.r))
        return f"<ArchState {regs} {flags_str(self.apsr)} ipsr={self.ipsr}>"


@dataclass(frozen=True, slots=True)
class RetireEvent:
    """One committed instruction (or exception boundary)."""

    seq: int
    pc: int
    inst: Instruction | None
    wb: tuple[int, int] | None            # (register, value)
    flags_after: int                      # NZCV nibble
    mem: tuple[str, int, int, int] | None  # (read|write, addr, size, data)
    exception: tuple[str, int] | None      # ((entry|return|fault), number)

    def describe(self) -> str:
        parts = [f"#{self.seq}", f"pc={self.pc:08x}",
                 str(self.inst) if self.inst else "-"]
        if self.wb:
            parts.append(f"r{self.wb[0]}={self.wb[1]:08x}")
        parts.append(flags_str(self.flags_after))
        if self.mem:
            kind, addr, size, data = self.mem
            parts.append(f"{kind}{size * 8}@{addr:08x}={data:08x}")
        if self.exception:
            parts.append(f"{self.exception[0]}({self.exception[1]})")
        return " ".join(parts)


# fields compared by the scoreboard, in reporting order
COMPARE_FIELDS = ("pc", "inst", "wb", "flags_after", "mem", "exception")
