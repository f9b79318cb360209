"""Functional coverage model.

Groups and bins are declared up front so percentages are meaningful:

    opcode          one bin per mnemonic
    flags           N/Z/C/V each set and clear (state after retirement)
    operand_corner  imm {0, 1, field max} and equal register operands
    bus             {byte,word} x {read,write} x {waited,unwaited}
    irq             entry, tail_chain, return

plus the cross of opcode x flag-outcome.  Halfword bus transfers do not
occur in this system, so the bus group declares no half bins; branch and
BKPT immediates are offsets/payloads, not operand corners, and are
excluded from the corner group.
"""

from __future__ import annotations

from ..arch import (EXC_ENTRY, EXC_RETURN_KIND, FLAG_C, FLAG_N, FLAG_V,
                    FLAG_Z)
from ..bus import Transfer
from ..errors import M3lvError
from ..isa import Form, Mnemonic
from .checker import ArchTransaction

_FLAG_BITS = (("N", FLAG_N), ("Z", FLAG_Z), ("C", FLAG_C), ("V", FLAG_V))

_IMM_MAX = {Form.IMM8: 255, Form.IMM3: 7, Form.SHIFT_IMM: 31,
            Form.MEM_IMM5: 31, Form.PC_LITERAL: 255}


class CoverGroup:
    __slots__ = ("name", "bins")

    def __init__(self, name: str, bin_names):
        self.name = name
        self.bins = {b: 0 for b in bin_names}

    def hit(self, bin_name: str) -> None:
        self.bins[bin_name] += 1

    @property
    def total(self) -> int:
        return len(self.bins)

    @property
    def hit_count(self) -> int:
        return sum(1 for c in self.bins.values() if c)

    @property
    def percent(self) -> float:
        return 100.0 * self.hit_count / self.total if self.bins else 0.0


class CrossGroup(CoverGroup):
    """Cross of two points; bins are 'left.right' over the full product."""

    def __init__(self, name: str, left, right):
        super().__init__(name, [f"{a}.{b}" for a in left for b in right])


def _flag_bins(apsr: int):
    for name, bit in _FLAG_BITS:
        yield f"{name}.{'set' if apsr & bit else 'clear'}"


class CoverageModel:
    def __init__(self):
        mnems = [m.value for m in Mnemonic]
        flag_names = [f"{n}.{s}" for n, _ in _FLAG_BITS for s in ("set", "clear")]
        self.groups = {
            "opcode": CoverGroup("opcode", mnems),
            "flags": CoverGroup("flags", flag_names),
            "operand_corner": CoverGroup(
                "operand_corner", ["imm.zero", "imm.one", "imm.max", "regs.equal"]),
            "bus": CoverGroup("bus", [f"{s}.{k}.{w}"
                                      for s in ("byte", "word")
                                      for k in ("read", "write")
                                      for w in ("unwaited", "waited")]),
            "irq": CoverGroup("irq", ["entry", "tail_chain", "return"]),
        }
        self.crosses = {
            "opcode_flags": CrossGroup("opcode_flags", mnems, flag_names),
        }

    # ------------------------------------------------------------ sampling

    def sample_txn(self, txn: ArchTransaction) -> None:
        ev = txn.event
        if ev.inst is not None:
            inst = ev.inst
            mnem = inst.mnemonic.value
            self.groups["opcode"].hit(mnem)
            flags = self.groups["flags"]
            cross = self.crosses["opcode_flags"]
            for b in _flag_bins(ev.flags_after):
                flags.hit(b)
                cross.hit(f"{mnem}.{b}")
            corner = self.groups["operand_corner"]
            form = inst.form
            maxval = _IMM_MAX.get(form)
            if maxval is not None and inst.mnemonic is not Mnemonic.BKPT:
                if inst.imm == 0:
                    corner.hit("imm.zero")
                elif inst.imm == 1:
                    corner.hit("imm.one")
                if inst.imm == maxval:
                    corner.hit("imm.max")
            if form is Form.REG3 and inst.rn == inst.rm:
                corner.hit("regs.equal")
            elif form is Form.DP and inst.rn == inst.rm:
                corner.hit("regs.equal")
        elif ev.exception is not None:
            kind = ev.exception[0]
            if kind == EXC_ENTRY:
                self.groups["irq"].hit("tail_chain" if txn.tail_chained else "entry")
            elif kind == EXC_RETURN_KIND:
                self.groups["irq"].hit("return")

    def sample_transfer(self, t: Transfer) -> None:
        if t.size == 2:
            return  # no halfword traffic in this system
        size = "byte" if t.size == 1 else "word"
        wait = "waited" if t.wait_cycles else "unwaited"
        self.groups["bus"].hit(f"{size}.{t.kind}.{wait}")

    # ------------------------------------------------------------- queries

    def all_groups(self):
        yield from self.groups.items()
        for name, cross in self.crosses.items():
            yield f"cross.{name}", cross

    @property
    def percent(self) -> float:
        total = hit = 0
        for _, g in self.all_groups():
            total += g.total
            hit += g.hit_count
        return 100.0 * hit / total if total else 0.0

    def has_bin(self, ref: str) -> bool:
        group, _, bin_name = ref.partition(".")
        g = self.groups.get(group)
        return g is not None and bin_name in g.bins

    def hits_for(self, ref: str) -> int:
        group, _, bin_name = ref.partition(".")
        g = self.groups.get(group)
        if g is None or bin_name not in g.bins:
            raise M3lvError(f"unknown coverage ref {ref!r}")
        return g.bins[bin_name]

    def merge(self, other: "CoverageModel") -> None:
        for (name, mine), (_, theirs) in zip(self.all_groups(), other.all_groups()):
            if mine.bins.keys() != theirs.bins.keys():
                raise M3lvError(f"coverage models differ in group {name}")
            for b, c in theirs.bins.items():
                mine.bins[b] += c

    def report_lines(self) -> list[str]:
        lines = []
        for name, g in self.all_groups():
            lines.append(f"{name}: {g.hit_count}/{g.total} bins ({g.percent:.1f}%)")
            unhit = [b for b, c in g.bins.items() if not c]
            if unhit and len(unhit) <= 12:
                lines.append(f"  unhit: {', '.join(unhit)}")
            elif unhit:
                lines.append(f"  unhit: {len(unhit)} bins")
        return lines


def coverage_sample(cov: CoverageModel, txn: ArchTransaction,
                    transfers) -> None:
    """Sample one retirement and the bus transfers in its window."""
    cov.sample_txn(txn)
    for t in transfers:
        cov.sample_transfer(t)
