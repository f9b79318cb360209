"""Directed test catalog.

Each entry is a named, fully deterministic scenario: a program, optional
NVIC setup and interrupt timeline, wait-state configuration.  The
catalog covers the Table-ish ADD fetch scenario, one witness per
catalogued bug, interrupt entry/tail-chain/nesting, wait-state stalls,
and a systematic coverage sweep that drives every mnemonic through
every reachable flag outcome.

Register convention inside generated sweeps: r2/r3 operands, r4 scratch
and branch targets, r5 the load/store window base (set once), r6/r7
flag-precondition scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import M3lvError
from ..isa import (COND_AL, Form, Instruction, Mnemonic, alu_eval,
                   shifter_eval)
from .generator import StimulusItem, KIND_CONFIG, KIND_INSTRUCTION, KIND_IRQ, synth_const

CODE_BASE = 0x100
WINDOW_BASE = 0x2000_0100

M = Mnemonic
F = Form


def _i(mnem, form, **kw) -> Instruction:
    return Instruction(mnem, form, **kw)


def movs(rd, imm):
    return _i(M.MOV, F.IMM8, rd=rd, imm=imm)


def bkpt():
    return _i(M.BKPT, F.IMM8, imm=0)


@dataclass
class DirectedTest:
    name: str
    description: str
    program: list[Instruction]
    nvic_setup: list[tuple[int, bool, int]] = field(default_factory=list)
    irq_rows: list[tuple[int, int, str]] = field(default_factory=list)
    wait_states: tuple[int, int] = (0, 0)
    handlers: dict[int, list[Instruction]] | None = None
    cycle_budget: int = 50_000


def items_for(test: DirectedTest) -> list[StimulusItem]:
    items: list[StimulusItem] = []
    seq = 0
    for line, enabled, prio in test.nvic_setup:
        items.append(StimulusItem(KIND_CONFIG, seq, config=(line, enabled, prio)))
        seq += 1
    for inst in test.program:
        items.append(StimulusItem(KIND_INSTRUCTION, seq, inst=inst))
        seq += 1
    for cycle, line, action in test.irq_rows:
        items.append(StimulusItem(KIND_IRQ, seq, irq=(cycle, line, action)))
        seq += 1
    return items


# ------------------------------------------------------ flag preconditions

def _precondition(flag: str, state: bool) -> list[Instruction]:
    """Short snippet leaving the named flag in the named state (r6 only)."""
    if flag == "N":
        if state:
            return [movs(6, 1), _i(M.LSL, F.SHIFT_IMM, rd=6, rm=6, imm=31)]
        return [movs(6, 1)]
    if flag == "Z":
        return [movs(6, 0)] if state else [movs(6, 1)]
    if flag == "C":
        if state:
            return [movs(6, 0), _i(M.CMP, F.IMM8, rn=6, imm=0)]
        return [movs(6, 0), _i(M.ADD, F.IMM8, rd=6, rn=6, imm=0)]
    if flag == "V":
        if state:
            return [movs(6, 1), _i(M.LSL, F.SHIFT_IMM, rd=6, rm=6, imm=31),
                    _i(M.SUB, F.IMM8, rd=6, rn=6, imm=1)]
        return [movs(6, 0), _i(M.ADD, F.IMM8, rd=6, rn=6, imm=0)]
    raise M3lvError(f"unknown flag {flag}")


# ----------------------------------------------------------- basic directed

def _add_directed() -> DirectedTest:
    return DirectedTest(
        "add_directed",
        "three-register ADD observed on the code bus as a word-size "
        "single read with OKAY response",
        [movs(2, 5), movs(3, 7),
         _i(M.ADD, F.REG3, rd=1, rn=2, rm=3), bkpt()])


def _alu_carry_witness() -> DirectedTest:
    # 0 - 1 clears C, +1 sets C, then ADCS needs carry-in to produce 1
    return DirectedTest(
        "alu_carry_witness",
        "ADC with carry-in set: mismatches when the ALU drops carry-in",
        [movs(0, 0),
         _i(M.SUB, F.IMM8, rd=0, rn=0, imm=1),
         _i(M.ADD, F.IMM8, rd=0, rn=0, imm=1),
         _i(M.ADC, F.DP, rd=0, rn=0, rm=0),
         bkpt()])


def _flag_z16_witness() -> DirectedTest:
    # result 0x00010000: Z must stay clear
    return DirectedTest(
        "flag_z16_witness",
        "result with only bit 16 set: catches a 16-bit-wide zero flag",
        [movs(1, 1),
         _i(M.LSL, F.SHIFT_IMM, rd=1, rm=1, imm=16),
         bkpt()])


def _fwd_miss_witness() -> DirectedTest:
    # back-to-back dependent adds only work with the execute bypass
    return DirectedTest(
        "fwd_miss_witness",
        "dependent instructions in consecutive cycles exercise forwarding",
        [movs(0, 1),
         _i(M.ADD, F.IMM8, rd=0, rn=0, imm=1),
         _i(M.ADD, F.REG3, rd=1, rn=0, rm=0),
         bkpt()])


def _br_off2_witness() -> DirectedTest:
    # B skips one instruction; a +2 target error lands on the BKPT instead
    return DirectedTest(
        "br_off2_witness",
        "short forward branch: catches an off-by-2 branch target",
        [movs(0, 0),
         _i(M.B, F.BRANCH, imm=0, cond=COND_AL),   # to pc+4: skips one
         movs(0, 99),
         movs(1, 1),
         bkpt()])


def _lsu_size_witness() -> DirectedTest:
    prog = synth_const(2, WINDOW_BASE)
    prog += [movs(0, 0xAB),
             _i(M.STRB, F.MEM_IMM5, rd=0, rn=2, imm=1),
             bkpt()]
    return DirectedTest(
        "lsu_size_witness",
        "byte store next to live bytes: catches a store that writes a word",
        prog)


def _fault_directed() -> DirectedTest:
    prog = synth_const(2, 0x4000_0000)  # unmapped
    prog += [_i(M.LDR, F.MEM_IMM5, rd=0, rn=2, imm=0), bkpt()]
    return DirectedTest(
        "fault_directed",
        "load from unmapped space: both models must fault identically",
        prog)


def _literal_directed() -> DirectedTest:
    # LDR r3, [PC, #4] reads a word inside the program image
    return DirectedTest(
        "literal_directed",
        "PC-relative literal load sees the instruction stream as data",
        [movs(0, 1),
         _i(M.LDR, F.PC_LITERAL, rd=3, imm=1),
         _i(M.NOP, F.IMPLIED),
         movs(1, 2),
         movs(2, 3),
         bkpt()])


def _branch_cond_directed() -> DirectedTest:
    return DirectedTest(
        "branch_cond_directed",
        "taken and not-taken conditional branches around a poison value",
        [movs(0, 0),
         _i(M.CMP, F.IMM8, rn=0, imm=0),        # Z=1
         _i(M.B, F.BRANCH, imm=0, cond=0),      # BEQ taken, skips poison
         movs(1, 99),
         _i(M.CMP, F.IMM8, rn=0, imm=1),        # Z=0
         _i(M.B, F.BRANCH, imm=0, cond=0),      # BEQ not taken
         movs(2, 7),
         bkpt()])


def _wait_state_directed() -> DirectedTest:
    prog = synth_const(5, WINDOW_BASE)
    prog += [movs(0, 0x5A),
             _i(M.STR, F.MEM_IMM5, rd=0, rn=5, imm=0),
             _i(M.LDR, F.MEM_IMM5, rd=1, rn=5, imm=0),
             _i(M.STRB, F.MEM_IMM5, rd=0, rn=5, imm=8),
             _i(M.LDRB, F.MEM_IMM5, rd=2, rn=5, imm=8),
             bkpt()]
    return DirectedTest(
        "wait_state_directed",
        "loads and stores against a 2-wait-state data memory",
        prog, wait_states=(0, 2))


def _thread_filler(n: int) -> list[Instruction]:
    """Straight-line ALU work on r4/r7 that an interrupt can land in."""
    prog = [movs(4, 1), movs(7, 0)]
    while len(prog) < n:
        prog.append(_i(M.ADD, F.IMM8, rd=7, rn=7, imm=1))
        prog.append(_i(M.EOR, F.DP, rd=4, rn=4, rm=7))
    return prog


def _irq_entry_directed() -> DirectedTest:
    return DirectedTest(
        "irq_entry_directed",
        "single interrupt: entry, handler, return in the middle of a thread",
        _thread_filler(60) + [bkpt()],
        nvic_setup=[(5, True, 3)],
        irq_rows=[(30, 5, "pend")])


def _irq_tail_directed() -> DirectedTest:
    # line 6 pends while line 4's handler runs at better-or-equal priority,
    # so the return tail-chains straight into line 6
    return DirectedTest(
        "irq_tail_directed",
        "second interrupt pending at return time tail-chains",
        _thread_filler(80) + [bkpt()],
        nvic_setup=[(4, True, 2), (6, True, 5)],
        irq_rows=[(30, 4, "pend"), (34, 6, "pend")])


def _long_handler(line: int) -> list[Instruction]:
    body = [movs(0, line & 0xFF)]
    for _ in range(10):
        body.append(_i(M.ADD, F.IMM8, rd=0, rn=0, imm=1))
    body.append(_i(M.BX, F.BX, rm=14))
    return body


def _irq_nested_directed() -> DirectedTest:
    # line 6 (prio 1) preempts line 4's handler (prio 5): LIFO unwind
    return DirectedTest(
        "irq_nested_directed",
        "higher-urgency interrupt preempts a running handler",
        _thread_filler(80) + [bkpt()],
        nvic_setup=[(4, True, 5), (6, True, 1)],
        irq_rows=[(30, 4, "pend"), (48, 6, "pend")],
        handlers={4: _long_handler(4)})


def _halt_flags(flag: str, state: bool) -> DirectedTest:
    name = f"halt_flags_{flag.lower()}{'1' if state else '0'}"
    return DirectedTest(
        name, f"halt with {flag} {'set' if state else 'clear'}",
        _precondition(flag, state) + [bkpt()])


# ----------------------------------------------------------- coverage sweep

_SEARCH_VALUES = (0, 1, 2, 5, 0x7F, 0xFF, 0xFFFF, 0x10000,
                  0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)
_FLAG_ATTR = {"N": "n", "Z": "z", "C": "c", "V": "v"}


def _flag_of(res, flag: str) -> bool:
    return getattr(res, _FLAG_ATTR[flag])


def _search_pair(compute, flag: str, state: bool, b_max=None):
    for a in _SEARCH_VALUES:
        for b in _SEARCH_VALUES:
            if b_max is not None and b > b_max:
                continue
            res = compute(a, b)
            if res is not None and _flag_of(res, flag) == state:
                return a, b
    return None


def _full_synth(reg: int, value: int) -> list[Instruction]:
    """Fixed 7-instruction constant synthesis (stable template sizes)."""
    seq = [movs(reg, (value >> 24) & 0xFF)]
    for shift in (16, 8, 0):
        seq.append(_i(M.LSL, F.SHIFT_IMM, rd=reg, rm=reg, imm=8))
        seq.append(_i(M.ADD, F.IMM8, rd=reg, rn=reg, imm=(value >> shift) & 0xFF))
    return seq


class _SweepBuilder:
    """Emits, per mnemonic, one template per reachable flag outcome."""

    def __init__(self):
        self.prog: list[Instruction] = []

    def emit(self, instructions) -> None:
        self.prog.extend(instructions)

    def operands(self, a: int, b: int | None = None) -> list[Instruction]:
        seq = synth_const(2, a)
        if b is not None:
            seq += synth_const(3, b)
        return seq

    def build(self) -> list[Instruction]:
        self.emit(synth_const(5, WINDOW_BASE))
        for flag in ("N", "Z", "C", "V"):
            for state in (True, False):
                for mnem in Mnemonic:
                    if mnem is M.BKPT:
                        continue  # covered by the halt_flags_* tests
                    tpl = self._template(mnem, flag, state)
                    if tpl is not None:
                        self.emit(tpl)
        self._extras()
        self.emit([bkpt()])
        return self.prog

    # template construction per mnemonic -------------------------------

    def _passthrough(self, flag, state, tail) -> list[Instruction]:
        return _precondition(flag, state) + tail

    def _template(self, mnem, flag, state):
        alu = alu_eval
        if mnem is M.MOV:
            if flag in ("C", "V"):
                return self._passthrough(flag, state, [movs(2, 5)])
            pair = _search_pair(lambda a, b: alu(M.MOV, 0, b), flag, state,
                                b_max=0xFF)
            if pair is None:
                return None  # MOV imm8 can never set N
            return [movs(2, pair[1])]
        if mnem is M.CMP:
            pair = _search_pair(lambda a, b: alu(M.SUB, a, b, True), flag, state)
            return self.operands(*pair) + [_i(M.CMP, F.DP, rn=2, rm=3)]
        if mnem is M.CMN:
            pair = _search_pair(lambda a, b: alu(M.ADD, a, b, False), flag, state)
            return self.operands(*pair) + [_i(M.CMN, F.DP, rn=2, rm=3)]
        if mnem is M.ADD:
            pair = _search_pair(lambda a, b: alu(M.ADD, a, b, False), flag, state)
            return self.operands(*pair) + [_i(M.ADD, F.REG3, rd=4, rn=2, rm=3)]
        if mnem is M.SUB:
            pair = _search_pair(lambda a, b: alu(M.SUB, a, b, True), flag, state)
            return self.operands(*pair) + [_i(M.SUB, F.REG3, rd=4, rn=2, rm=3)]
        if mnem is M.ADC:
            pair = _search_pair(lambda a, b: alu(M.ADD, a, b, False), flag, state)
            return (self.operands(*pair) + _precondition("C", False)
                    + [_i(M.ADC, F.DP, rd=2, rn=2, rm=3)])
        if mnem is M.SBC:
            pair = _search_pair(lambda a, b: alu(M.SUB, a, b, True), flag, state)
            return (self.operands(*pair) + _precondition("C", True)
                    + [_i(M.SBC, F.DP, rd=2, rn=2, rm=3)])
        if mnem is M.RSB:
            pair = _search_pair(lambda a, b: alu(M.SUB, 0, b, True), flag, state)
            if pair is None:
                return None
            return self.operands(2, pair[1]) + [_i(M.RSB, F.DP, rd=2, rn=2, rm=3)]
        if mnem is M.MUL:
            if flag in ("C", "V"):
                tail = self.operands(3, 5) + [_i(M.MUL, F.DP, rd=2, rn=2, rm=3)]
                return _precondition(flag, state) + tail
            pair = _search_pair(lambda a, b: alu(M.MUL, a, b), flag, state)
            if pair is None:
                return None
            return self.operands(*pair) + [_i(M.MUL, F.DP, rd=2, rn=2, rm=3)]
        if mnem in (M.AND, M.EOR, M.ORR, M.BIC, M.TST, M.MVN):
            form_kw = {"rn": 2, "rm": 3} if mnem is M.TST else {"rd": 2, "rn": 2, "rm": 3}
            tail = [_i(mnem, F.DP, **form_kw)]
            if flag in ("C", "V"):
                return self.operands(3, 5) + _precondition(flag, state) + tail
            op = M.AND if mnem is M.TST else mnem
            pair = _search_pair(lambda a, b: alu(op, a, b), flag, state)
            if pair is None:
                return None
            return self.operands(*pair) + tail
        if mnem in (M.LSL, M.LSR, M.ASR):
            if flag == "V":
                tail = [_i(mnem, F.SHIFT_IMM, rd=4, rm=2, imm=1)]
                return self.operands(5) + _precondition("V", state) + tail
            found = _search_pair(
                lambda a, amt: None if amt > 31 else
                _shift_res(mnem, a, amt if (mnem is M.LSL or amt) else 32),
                flag, state, b_max=31)
            if found is None:
                return None
            a, amt = found
            return self.operands(a) + [_i(mnem, F.SHIFT_IMM, rd=4, rm=2, imm=amt)]
        if mnem is M.ROR:
            if flag == "V":
                tail = [movs(3, 4), _i(M.ROR, F.DP, rd=2, rn=2, rm=3)]
                return self.operands(5) + _precondition("V", state) + tail
            found = _search_pair(lambda a, amt: _shift_res(M.ROR, a, amt),
                                 flag, state, b_max=0x7F)
            if found is None:
                return None
            a, amt = found
            return (self.operands(a) + [movs(3, amt),
                                        _i(M.ROR, F.DP, rd=2, rn=2, rm=3)])
        if mnem in (M.LDR, M.STR, M.LDRB, M.STRB):
            off = {M.LDR: 0, M.STR: 1, M.LDRB: 8, M.STRB: 9}[mnem]
            tail = [_i(mnem, F.MEM_IMM5, rd=4, rn=5, imm=off)]
            return _precondition(flag, state) + tail
        if mnem is M.NOP:
            return _precondition(flag, state) + [_i(M.NOP, F.IMPLIED)]
        if mnem is M.B:
            # raw imm11 0x7FF is offset -1 halfwords: branch to pc+2 (next)
            return _precondition(flag, state) + [
                _i(M.B, F.BRANCH, imm=0x7FF, cond=COND_AL)]
        if mnem is M.BX:
            pre = _precondition(flag, state)
            # r4 := (address after the BX) | 1; synth is fixed length 7
            here = CODE_BASE + 2 * len(self.prog)
            target = here + 2 * (7 + len(pre) + 1)
            return _full_synth(4, target | 1) + pre + [_i(M.BX, F.BX, rm=4)]
        return None

    def _extras(self) -> None:
        # operand corners and equal-register operands
        self.emit([movs(0, 0), movs(0, 1), movs(0, 255),
                   _i(M.ADD, F.IMM3, rd=1, rn=0, imm=7),
                   _i(M.LSL, F.SHIFT_IMM, rd=1, rm=0, imm=31),
                   _i(M.ADD, F.REG3, rd=1, rn=0, rm=0),
                   _i(M.AND, F.DP, rd=1, rn=1, rm=1),
                   _i(M.LDR, F.MEM_IMM5, rd=4, rn=5, imm=31),
                   _i(M.LDR, F.PC_LITERAL, rd=4, imm=0)])
        # taken conditional branch over a poison move
        self.emit([movs(6, 0), _i(M.CMP, F.IMM8, rn=6, imm=0),
                   _i(M.B, F.BRANCH, imm=0, cond=0), movs(6, 99)])


def _shift_res(kind, a, amount):
    if amount == 0:
        return None  # amount 0 passes carry through; flags not forced
    value, c = shifter_eval(kind, a, amount, False)
    class R:  # minimal AluResult-alike for flag probing
        pass
    r = R()
    r.n = bool(value >> 31)
    r.z = value == 0
    r.c = c
    r.v = False
    return r


def _coverage_sweep() -> DirectedTest:
    return DirectedTest(
        "coverage_sweep",
        "systematic walk of every mnemonic through every reachable flag "
        "outcome, plus operand corners",
        _SweepBuilder().build())


# ------------------------------------------------------------------ catalog

_BUILDERS = {
    "add_directed": _add_directed,
    "alu_carry_witness": _alu_carry_witness,
    "flag_z16_witness": _flag_z16_witness,
    "fwd_miss_witness": _fwd_miss_witness,
    "br_off2_witness": _br_off2_witness,
    "lsu_size_witness": _lsu_size_witness,
    "fault_directed": _fault_directed,
    "literal_directed": _literal_directed,
    "branch_cond_directed": _branch_cond_directed,
    "wait_state_directed": _wait_state_directed,
    "irq_entry_directed": _irq_entry_directed,
    "irq_tail_directed": _irq_tail_directed,
    "irq_nested_directed": _irq_nested_directed,
    "coverage_sweep": _coverage_sweep,
}

for _flag in ("N", "Z", "C", "V"):
    for _state in (True, False):
        _t = _halt_flags(_flag, _state)
        _BUILDERS[_t.name] = (lambda f=_flag, s=_state: _halt_flags(f, s))

BUG_WITNESSES = {
    "ALU_CARRY": "alu_carry_witness",
    "FLAG_Z16": "flag_z16_witness",
    "FWD_MISS": "fwd_miss_witness",
    "BR_OFF2": "br_off2_witness",
    "LSU_SIZE": "lsu_size_witness",
}


def directed_names() -> list[str]:
    return sorted(_BUILDERS)


def build_directed(name: str) -> DirectedTest:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise M3lvError(f"unknown directed test {name!r}") from None
