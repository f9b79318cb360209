"""Golden architectural reference model.

Executes one instruction per step with no pipeline timing: fetch the
halfword at PC, decode, apply architectural semantics, emit a
RetireEvent schema-identical to the pipelined core's.  Instructions that
read PC observe (own address + 4).

Exception sequencing is driven by the host through step() directives:

    ("enter", e)       full entry before the next instruction: push the
                       8-word frame, LR := EXC_RETURN, vector fetch
    ("return",)        the BX being executed unstacks the frame
    ("tail_return",)   the BX retires but the frame stays put
    ("tail_enter", e)  entry without pushes (tail-chained)

With no directive, a BX that reads the EXC_RETURN token performs a full
unstack (standalone use without an interrupt controller).

Memory faults (out-of-map access, unfetchable PC, undefined encoding)
retire a fault event with exception ("fault", 3) and halt.
"""

from __future__ import annotations

from .arch import (ArchState, EXC_ENTRY, EXC_FAULT, EXC_RETURN,
                   EXC_RETURN_KIND, FLAG_C, FLAG_V, FRAME_REGS,
                   HARDFAULT_NUM, LR, PC, RetireEvent, SP, pack_flags)
from .errors import M3lvError, MemoryFault, UndefinedError
from .isa import (COND_AL, Form, Instruction, MASK32, Mnemonic, alu_eval,
                  branch_offset, condition_passed, decode_cached,
                  shifter_eval)
from .memory import MemoryModel

_SHIFT_REG_OPS = (Mnemonic.LSL, Mnemonic.LSR, Mnemonic.ASR, Mnemonic.ROR)
_MEM_SCALE = {Mnemonic.LDR: (4, 4), Mnemonic.STR: (4, 4),
              Mnemonic.LDRB: (1, 1), Mnemonic.STRB: (1, 1)}


def reset_state(memory: MemoryModel, vector_base: int = 0) -> ArchState:
    """Initial SP from [base], PC from [base+4] with bit 0 cleared."""
    st = ArchState()
    st.r[SP] = memory.read_word(vector_base)
    st.r[PC] = memory.read_word(vector_base + 4) & ~1 & MASK32
    return st


def _fault(st: ArchState, seq: int, pc: int,
           inst: Instruction | None) -> RetireEvent:
    st.halted = True
    return RetireEvent(seq, pc, inst, None, st.apsr, None,
                       (EXC_FAULT, HARDFAULT_NUM))


def _entry(st: ArchState, memory: MemoryModel, seq: int, exc_num: int,
           vector_base: int, push: bool) -> RetireEvent:
    if push:
        sp_new = (st.r[SP] - 32) & MASK32
        frame = [st.r[i] for i in FRAME_REGS] + [st.r[PC], st.xpsr()]
        try:
            for i, word in enumerate(frame):
                memory.write(sp_new + 4 * i, 4, word)
        except MemoryFault:
            return _fault(st, seq, st.r[PC], None)
        st.r[SP] = sp_new
        st.r[LR] = EXC_RETURN
    st.ipsr = exc_num
    try:
        handler = memory.read_word(vector_base + 4 * exc_num)
    except MemoryFault:
        return _fault(st, seq, st.r[PC], None)
    st.r[PC] = handler & ~1 & MASK32
    return RetireEvent(seq, st.r[PC], None, None, st.apsr, None,
                       (EXC_ENTRY, exc_num))


def step_in_place(st: ArchState, memory: MemoryModel, directive=None,
                  seq: int = 0, vector_base: int = 0) -> RetireEvent:
    """Advance st by one retirement; the engine behind reference_step."""
    if st.halted:
        raise M3lvError("reference model stepped while halted")

    if directive is not None and directive[0] in ("enter", "tail_enter"):
        return _entry(st, memory, seq, directive[1], vector_base,
                      push=directive[0] == "enter")

    pc = st.r[PC]
    try:
        halfword = memory.read(pc, 2)
    except MemoryFault:
        return _fault(st, seq, pc, None)
    try:
        inst = decode_cached(halfword)
    except UndefinedError:
        return _fault(st, seq, pc, None)

    r = st.r
    c_in = bool(st.apsr & FLAG_C)
    v_in = bool(st.apsr & FLAG_V)
    m, f = inst.mnemonic, inst.form
    wb = None
    mem_eff = None
    exc = None
    halt_after = False
    next_pc = pc + 2
    res = None

    if f is Form.IMM8:
        if m is Mnemonic.MOV:
            res = alu_eval(Mnemonic.MOV, 0, inst.imm, c_in, v_in)
            wb = (inst.rd, res.value)
        elif m is Mnemonic.CMP:
            res = alu_eval(Mnemonic.SUB, r[inst.rn], inst.imm, True)
        elif m is Mnemonic.ADD:
            res = alu_eval(Mnemonic.ADD, r[inst.rd], inst.imm, False)
            wb = (inst.rd, res.value)
        elif m is Mnemonic.SUB:
            res = alu_eval(Mnemonic.SUB, r[inst.rd], inst.imm, True)
            wb = (inst.rd, res.value)
        else:  # BKPT: retire, then halt
            halt_after = True

    elif f is Form.REG3 or f is Form.IMM3:
        b = r[inst.rm] if f is Form.REG3 else inst.imm
        if m is Mnemonic.ADD:
            res = alu_eval(Mnemonic.ADD, r[inst.rn], b, False)
        else:
            res = alu_eval(Mnemonic.SUB, r[inst.rn], b, True)
        wb = (inst.rd, res.value)

    elif f is Form.SHIFT_IMM:
        amount = inst.imm if m is Mnemonic.LSL else (inst.imm or 32)
        value, c = shifter_eval(m, r[inst.rm], amount, c_in)
        wb = (inst.rd, value)
        st.apsr = pack_flags(bool(value >> 31), value == 0, c, v_in)

    elif f is Form.DP:
        if m in _SHIFT_REG_OPS:
            amount = r[inst.rm] & 0xFF
            value, c = shifter_eval(m, r[inst.rd], amount, c_in)
            wb = (inst.rd, value)
            st.apsr = pack_flags(bool(value >> 31), value == 0, c, v_in)
        elif m is Mnemonic.ADC:
            res = alu_eval(Mnemonic.ADD, r[inst.rd], r[inst.rm], c_in)
            wb = (inst.rd, res.value)
        elif m is Mnemonic.SBC:
            res = alu_eval(Mnemonic.SUB, r[inst.rd], r[inst.rm], c_in)
            wb = (inst.rd, res.value)
        elif m is Mnemonic.CMP:
            res = alu_eval(Mnemonic.SUB, r[inst.rn], r[inst.rm], True)
        elif m is Mnemonic.CMN:
            res = alu_eval(Mnemonic.ADD, r[inst.rn], r[inst.rm], False)
        elif m is Mnemonic.TST:
            res = alu_eval(Mnemonic.AND, r[inst.rn], r[inst.rm], c_in, v_in)
        elif m is Mnemonic.RSB:
            res = alu_eval(Mnemonic.SUB, 0, r[inst.rm], True)
            wb = (inst.rd, res.value)
        else:  # AND EOR ORR BIC MVN MUL
            res = alu_eval(m, r[inst.rd], r[inst.rm], c_in, v_in)
            wb = (inst.rd, res.value)

    elif f is Form.MEM_IMM5 or f is Form.PC_LITERAL:
        if f is Form.PC_LITERAL:
            addr = ((pc + 4) & ~3) + inst.imm * 4
            size = 4
            load = True
        else:
            scale, size = _MEM_SCALE[m]
            addr = (r[inst.rn] + inst.imm * scale) & MASK32
            load = m in (Mnemonic.LDR, Mnemonic.LDRB)
        try:
            if load:
                data = memory.read(addr, size)
                wb = (inst.rd, data)
                mem_eff = ("read", addr, size, data)
            else:
                data = r[inst.rd] & ((1 << (size * 8)) - 1)
                memory.write(addr, size, data)
                mem_eff = ("write", addr, size, data)
        except MemoryFault:
            return _fault(st, seq, pc, inst)

    elif f is Form.BRANCH:
        if condition_passed(inst.cond, bool(st.apsr & 8), bool(st.apsr & 4),
                            c_in, v_in):
            next_pc = (pc + 4 + branch_offset(inst)) & MASK32

    elif f is Form.BX:
        val = (pc + 4) if inst.rm == PC else r[inst.rm]
        if val == EXC_RETURN:
            kind = directive[0] if directive else "return"
            old_ipsr = st.ipsr
            if kind == "tail_return":
                r[PC] = pc  # tail entry directive will redirect
                return RetireEvent(seq, pc, inst, None, st.apsr, None,
                                   (EXC_RETURN_KIND, old_ipsr))
            sp = r[SP]
            try:
                frame = [memory.read_word(sp + 4 * i) for i in range(8)]
            except MemoryFault:
                return _fault(st, seq, pc, inst)
            for i, reg in enumerate(FRAME_REGS):
                r[reg] = frame[i]
            r[SP] = (sp + 32) & MASK32
            next_pc = frame[6] & ~1 & MASK32
            st.apsr = (frame[7] >> 28) & 0xF
            st.ipsr = frame[7] & 0x1FF
            r[PC] = next_pc
            return RetireEvent(seq, pc, inst, None, st.apsr, None,
                               (EXC_RETURN_KIND, old_ipsr))
        if (val & 0xF0000000) == 0xF0000000 or (val & 1) == 0:
            return _fault(st, seq, pc, inst)
        next_pc = val & ~1 & MASK32

    # NOP: fall through with no effects

    if res is not None:
        st.apsr = pack_flags(res.n, res.z, res.c, res.v)
    if wb is not None:
        r[wb[0]] = wb[1]
    r[PC] = next_pc & MASK32
    if halt_after:
        st.halted = True
    return RetireEvent(seq, pc, inst, wb, st.apsr, mem_eff, exc)


def reference_step(state: ArchState, memory: MemoryModel, directive=None,
                   seq: int = 0,
                   vector_base: int = 0) -> tuple[ArchState, RetireEvent]:
    """Pure single-step: returns a new ArchState, input untouched.

    Note memory itself is a live resource: stores and exception frames
    commit into it, so callers hand the reference model its own memory.
    """
    nxt = state.copy()
    event = step_in_place(nxt, memory, directive, seq, vector_base)
    return nxt, event


class ReferenceModel:
    """Stateful convenience wrapper used by the environment."""

    def __init__(self, memory: MemoryModel, vector_base: int = 0):
        self.memory = memory
        self.vector_base = vector_base
        self.state = reset_state(memory, vector_base)
        self.seq = 0

    @property
    def halted(self) -> bool:
        return self.state.halted

    def step(self, directive=None) -> RetireEvent:
        event = step_in_place(self.state, self.memory, directive,
                              self.seq, self.vector_base)
        self.seq += 1
        return event
