"""Cycle-stepped 3-stage pipelined core model (the device under test).

Sub-blocks mirror a small in-order microcontroller core: prefetch unit
(3-halfword buffer fed by word-wide ICODE reads), instruction decode,
and an execute stage owning the ALU/shifter, the load/store unit on the
DCODE port, and branch resolution.  Branches predict not-taken and
resolve in execute; a taken branch flushes fetch/decode and redirects.
Writebacks commit to the register file one cycle after retirement, with
a full execute-to-execute bypass so dependent instructions run
back-to-back (the FWD_MISS bug disables exactly that bypass).

Exception entry/return run as execute-stage microsequences at
retirement boundaries: 8 frame pushes (entry) or pops (return) on the
DCODE port, then a vector fetch on ICODE.  Tail-chaining skips the
pops and pushes entirely.

The injectable bug catalogue:

    ALU_CARRY  ADC ignores carry-in
    FLAG_Z16   Z flag computed from the low 16 result bits only
    FWD_MISS   operands read the (stale) register file, never the bypass
    BR_OFF2    taken-branch target off by +2
    LSU_SIZE   byte stores issue full word writes
"""

from __future__ import annotations

from enum import Enum

from .arch import (ArchState, EXC_ENTRY, EXC_FAULT, EXC_RETURN,
                   EXC_RETURN_KIND, FLAG_C, FLAG_V, FRAME_REGS,
                   HARDFAULT_NUM, LR, PC, RetireEvent, SP, pack_flags)
from .bus import BusReply, BusRequest, RESP_ERROR
from .errors import M3lvError
from .isa import (Form, Instruction, MASK32, Mnemonic, alu_eval,
                  branch_offset, condition_passed, decode_cached,
                  shifter_eval)
from .memory import MemoryModel
from .nvic import ACTION_ENTER, ACTION_RETURN, ACTION_TAIL, NvicDirective


class BugId(Enum):
    NONE = "NONE"
    ALU_CARRY = "ALU_CARRY"
    FLAG_Z16 = "FLAG_Z16"
    FWD_MISS = "FWD_MISS"
    BR_OFF2 = "BR_OFF2"
    LSU_SIZE = "LSU_SIZE"


_UNDEF = "undef"

_SHIFT_REG_OPS = (Mnemonic.LSL, Mnemonic.LSR, Mnemonic.ASR, Mnemonic.ROR)
_MEM_SCALE = {Mnemonic.LDR: (4, 4), Mnemonic.STR: (4, 4),
              Mnemonic.LDRB: (1, 1), Mnemonic.STRB: (1, 1)}

# execute-stage occupancy
_IDLE = "idle"
_LSU = "lsu"
_RET_WAIT = "ret_wait"
_EXC_PUSH = "exc_push"
_EXC_VEC = "exc_vec"
_EXC_POP = "exc_pop"

BOUNDARY = "boundary"
RETURNING = "returning"


class PipelinedCore:
    """One DUT instance; deterministic, single-threaded."""

    def __init__(self, memory: MemoryModel, vector_base: int = 0,
                 bug: BugId = BugId.NONE):
        self.vector_base = vector_base
        self.bug = bug
        self.arch = ArchState()
        self.arch.r[SP] = memory.read_word(vector_base)
        start = memory.read_word(vector_base + 4) & ~1 & MASK32
        self.arch.r[PC] = start

        self.cycle = 0
        self.seq = 0
        self.halted = False

        self.fetch_pc = start
        self.prefetch: list[tuple[int, int | None]] = []
        self.icode_busy = False
        self.icode_discard = False
        self.icode_vector = False
        self.icode_addr = 0
        self.icode_first = 0

        self.decode_slot: tuple[int, object] | None = None
        self.exec_slot: tuple[int, object] | None = None
        self.mode = _IDLE
        self.lsu: dict | None = None
        self.exc: dict | None = None
        self.wb_buf: tuple[int, int] | None = None

    # ----------------------------------------------------------- controls

    def inject_bug(self, bug: BugId) -> None:
        if self.cycle != 0:
            raise M3lvError("inject_bug must be called before the first clock")
        self.bug = bug

    def wants_directive(self) -> str | None:
        """What kind of NVIC directive the core can accept this cycle."""
        if self.halted:
            return None
        if self.mode == _RET_WAIT:
            return RETURNING
        if self.mode == _IDLE:
            return BOUNDARY
        return None

    # ------------------------------------------------------------ helpers

    def _read_reg(self, i: int, pc: int) -> int:
        if i == PC:
            return (pc + 4) & MASK32
        wb = self.wb_buf
        if wb is not None and wb[0] == i and self.bug is not BugId.FWD_MISS:
            return wb[1]
        return self.arch.r[i]

    def _flags(self, n: bool, z: bool, c: bool, v: bool) -> int:
        return pack_flags(n, z, c, v)

    def _apply_result(self, value: int, c: bool, v: bool) -> None:
        z = (value & 0xFFFF) == 0 if self.bug is BugId.FLAG_Z16 else value == 0
        self.arch.apsr = pack_flags(bool(value >> 31), z, c, v)

    def _retire(self, pc: int, inst, wb, mem_eff, exc) -> RetireEvent:
        ev = RetireEvent(self.seq, pc, inst, wb, self.arch.apsr, mem_eff, exc)
        self.seq += 1
        return ev

    def _fault(self, pc: int, inst) -> RetireEvent:
        self.halted = True
        return self._retire(pc, inst, None, None, (EXC_FAULT, HARDFAULT_NUM))

    def _flush(self) -> None:
        self.prefetch.clear()
        self.decode_slot = None
        self.exec_slot = None
        if self.icode_busy and not self.icode_vector:
            self.icode_discard = True

    def _branch_to(self, target: int) -> None:
        if self.bug is BugId.BR_OFF2:
            target = (target + 2) & MASK32
        self._flush()
        self.fetch_pc = target & ~1 & MASK32

    def _oldest_pc(self) -> int:
        """Address of the oldest instruction not yet retired."""
        if self.exec_slot is not None:
            return self.exec_slot[0]
        if self.decode_slot is not None:
            return self.decode_slot[0]
        if self.prefetch:
            return self.prefetch[0][0]
        if self.icode_busy and not self.icode_discard and not self.icode_vector:
            return self.icode_first
        return self.fetch_pc

    # --------------------------------------------------------------- clock

    def clock(self, icode_rsp: BusReply | None, dcode_rsp: BusReply | None,
              directive: NvicDirective | None = None
              ) -> tuple[BusRequest | None, BusRequest | None, RetireEvent | None]:
        if self.halted:
            self.cycle += 1
            return None, None, None

        icode_req: BusRequest | None = None
        dcode_req: BusRequest | None = None
        retire: RetireEvent | None = None
        wb_commit = self.wb_buf
        vector_data: tuple[int, bool] | None = None  # (word, errored)

        # icode data phase
        if self.icode_busy and icode_rsp is not None and icode_rsp.ready:
            self.icode_busy = False
            errored = icode_rsp.resp == RESP_ERROR
            if self.icode_discard:
                self.icode_discard = False
            elif self.icode_vector:
                self.icode_vector = False
                vector_data = (icode_rsp.rdata, errored)
            else:
                word = icode_rsp.rdata
                for off in (0, 2):
                    a = self.icode_addr + off
                    if a >= self.icode_first:
                        half = None if errored else (word >> (8 * off)) & 0xFFFF
                        self.prefetch.append((a, half))

        # exception entry begins at a retirement boundary, preempting
        # whatever sits unexecuted in the pipeline
        if (directive is not None and directive.action == ACTION_ENTER
                and self.mode == _IDLE):
            if wb_commit is not None:
                self.arch.r[wb_commit[0]] = wb_commit[1]
                wb_commit = None
                self.wb_buf = None
            return_addr = self._oldest_pc()
            self._flush()
            r = self.arch.r
            frame = [r[i] for i in FRAME_REGS] + [return_addr, self.arch.xpsr()]
            self.exc = {"kind": "entry", "num": directive.exception,
                        "idx": 0, "outstanding": False, "frame": frame,
                        "sp_new": (r[SP] - 32) & MASK32, "bx_pc": None,
                        "old_ipsr": self.arch.ipsr}
            self.mode = _EXC_PUSH

        mode = self.mode

        if mode == _LSU:
            if dcode_rsp is not None and dcode_rsp.ready:
                lsu = self.lsu
                self.lsu = None
                self.mode = _IDLE
                if dcode_rsp.resp == RESP_ERROR:
                    retire = self._fault(lsu["pc"], lsu["inst"])
                elif lsu["load"]:
                    data = dcode_rsp.rdata & ((1 << (lsu["size"] * 8)) - 1)
                    wb = (lsu["inst"].rd, data)
                    retire = self._retire(lsu["pc"], lsu["inst"], wb,
                                          ("read", lsu["addr"], lsu["size"], data),
                                          None)
                else:
                    retire = self._retire(lsu["pc"], lsu["inst"], None,
                                          lsu["intent"], None)

        elif mode == _EXC_PUSH:
            exc = self.exc
            if exc["outstanding"]:
                if dcode_rsp is not None and dcode_rsp.ready:
                    exc["outstanding"] = False
                    if dcode_rsp.resp == RESP_ERROR:
                        retire = self._fault(exc["frame"][6], None)
            if retire is None and not exc["outstanding"]:
                if exc["idx"] < 8:
                    dcode_req = BusRequest(exc["sp_new"] + 4 * exc["idx"], 4,
                                           True, exc["frame"][exc["idx"]])
                    exc["idx"] += 1
                    exc["outstanding"] = True
                else:
                    self.mode = _EXC_VEC
                    icode_req = self._issue_vector()

        elif mode == _EXC_VEC:
            if not self.icode_vector and not self.icode_busy and vector_data is None:
                icode_req = self._issue_vector()
            if vector_data is not None:
                word, errored = vector_data
                exc = self.exc
                self.exc = None
                self.mode = _IDLE
                if errored:
                    pc = exc["frame"][6] if exc["kind"] == "entry" else exc["bx_pc"]
                    retire = self._fault(pc, None)
                else:
                    if exc["kind"] == "entry":
                        self.arch.r[SP] = exc["sp_new"]
                        self.arch.r[LR] = EXC_RETURN
                    self.arch.ipsr = exc["num"]
                    handler = word & ~1 & MASK32
                    self.fetch_pc = handler
                    retire = self._retire(handler, None, None, None,
                                          (EXC_ENTRY, exc["num"]))

        elif mode == _EXC_POP:
            exc = self.exc
            if exc["outstanding"] and dcode_rsp is not None and dcode_rsp.ready:
                exc["outstanding"] = False
                if dcode_rsp.resp == RESP_ERROR:
                    retire = self._fault(exc["bx_pc"], exc["inst"])
                else:
                    exc["frame"].append(dcode_rsp.rdata)
            if retire is None and not exc["outstanding"]:
                if exc["idx"] < 8:
                    dcode_req = BusRequest(exc["sp"] + 4 * exc["idx"], 4, False)
                    exc["idx"] += 1
                    exc["outstanding"] = True
                else:
                    frame = exc["frame"]
                    r = self.arch.r
                    for i, reg in enumerate(FRAME_REGS):
                        r[reg] = frame[i]
                    r[SP] = (exc["sp"] + 32) & MASK32
                    self.arch.apsr = (frame[7] >> 28) & 0xF
                    self.arch.ipsr = frame[7] & 0x1FF
                    self.fetch_pc = frame[6] & ~1 & MASK32
                    self.exc = None
                    self.mode = _IDLE
                    retire = self._retire(exc["bx_pc"], exc["inst"], None, None,
                                          (EXC_RETURN_KIND, exc["old_ipsr"]))

        elif mode == _RET_WAIT:
            if directive is not None and directive.action == ACTION_RETURN:
                exc = self.exc
                exc.update(idx=0, outstanding=False, frame=[],
                           sp=self.arch.r[SP])
                self.mode = _EXC_POP
                dcode_req = BusRequest(exc["sp"], 4, False)
                exc["idx"] = 1
                exc["outstanding"] = True
            elif directive is not None and directive.action == ACTION_TAIL:
                exc = self.exc
                retire = self._retire(exc["bx_pc"], exc["inst"], None, None,
                                      (EXC_RETURN_KIND, exc["old_ipsr"]))
                exc.update(kind="tail", num=directive.exception)
                self.mode = _EXC_VEC
                icode_req = self._issue_vector()

        elif self.exec_slot is not None:  # mode == _IDLE
            pc, payload = self.exec_slot
            self.exec_slot = None
            if payload == _UNDEF or payload is None:
                retire = self._fault(pc, None)
            else:
                retire, dcode_req = self._execute(pc, payload)

        # pipeline advance: decode feeds execute, prefetch feeds decode
        if (self.mode == _IDLE and self.exec_slot is None
                and self.decode_slot is not None and not self.halted):
            self.exec_slot = self.decode_slot
            self.decode_slot = None
        if self.decode_slot is None and self.prefetch:
            addr, half = self.prefetch.pop(0)
            if half is None:
                self.decode_slot = (addr, None)
            else:
                try:
                    self.decode_slot = (addr, decode_cached(half))
                except Exception:
                    self.decode_slot = (addr, _UNDEF)

        # prefetch issue: word-wide, keeps the 3-entry buffer bounded
        if (self.mode in (_IDLE, _LSU) and not self.icode_busy
                and not self.halted and len(self.prefetch) <= 1):
            word_addr = self.fetch_pc & ~3 & MASK32
            icode_req = BusRequest(word_addr, 4, False)
            self.icode_busy = True
            self.icode_addr = word_addr
            self.icode_first = self.fetch_pc
            self.fetch_pc = (word_addr + 4) & MASK32

        if wb_commit is not None:
            self.arch.r[wb_commit[0]] = wb_commit[1]
        self.wb_buf = retire.wb if retire is not None else None

        self.cycle += 1
        return icode_req, dcode_req, retire

    def _issue_vector(self) -> BusRequest | None:
        if self.icode_busy:
            return None
        addr = self.vector_base + 4 * self.exc["num"]
        self.icode_busy = True
        self.icode_vector = True
        return BusRequest(addr, 4, False)

    # ------------------------------------------------------------ execute

    def _execute(self, pc: int, inst: Instruction
                 ) -> tuple[RetireEvent | None, BusRequest | None]:
        m, f = inst.mnemonic, inst.form
        apsr = self.arch.apsr
        c_in = bool(apsr & FLAG_C)
        v_in = bool(apsr & FLAG_V)
        read = self._read_reg
        wb = None
        res = None

        if f is Form.IMM8:
            if m is Mnemonic.MOV:
                res = alu_eval(Mnemonic.MOV, 0, inst.imm, c_in, v_in)
                wb = (inst.rd, res.value)
            elif m is Mnemonic.CMP:
                res = alu_eval(Mnemonic.SUB, read(inst.rn, pc), inst.imm, True)
            elif m is Mnemonic.ADD:
                res = alu_eval(Mnemonic.ADD, read(inst.rd, pc), inst.imm, False)
                wb = (inst.rd, res.value)
            elif m is Mnemonic.SUB:
                res = alu_eval(Mnemonic.SUB, read(inst.rd, pc), inst.imm, True)
                wb = (inst.rd, res.value)
            else:  # BKPT: halt sentinel retires first
                ev = self._retire(pc, inst, None, None, None)
                self.halted = True
                return ev, None

        elif f is Form.REG3 or f is Form.IMM3:
            b = read(inst.rm, pc) if f is Form.REG3 else inst.imm
            if m is Mnemonic.ADD:
                res = alu_eval(Mnemonic.ADD, read(inst.rn, pc), b, False)
            else:
                res = alu_eval(Mnemonic.SUB, read(inst.rn, pc), b, True)
            wb = (inst.rd, res.value)

        elif f is Form.SHIFT_IMM:
            amount = inst.imm if m is Mnemonic.LSL else (inst.imm or 32)
            value, c = shifter_eval(m, read(inst.rm, pc), amount, c_in)
            wb = (inst.rd, value)
            self._apply_result(value, c, v_in)
            return self._retire(pc, inst, wb, None, None), None

        elif f is Form.DP:
            if m in _SHIFT_REG_OPS:
                amount = read(inst.rm, pc) & 0xFF
                value, c = shifter_eval(m, read(inst.rd, pc), amount, c_in)
                wb = (inst.rd, value)
                self._apply_result(value, c, v_in)
                return self._retire(pc, inst, wb, None, None), None
            if m is Mnemonic.ADC:
                carry = False if self.bug is BugId.ALU_CARRY else c_in
                res = alu_eval(Mnemonic.ADD, read(inst.rd, pc),
                               read(inst.rm, pc), carry)
                wb = (inst.rd, res.value)
            elif m is Mnemonic.SBC:
                res = alu_eval(Mnemonic.SUB, read(inst.rd, pc),
                               read(inst.rm, pc), c_in)
                wb = (inst.rd, res.value)
            elif m is Mnemonic.CMP:
                res = alu_eval(Mnemonic.SUB, read(inst.rn, pc),
                               read(inst.rm, pc), True)
            elif m is Mnemonic.CMN:
                res = alu_eval(Mnemonic.ADD, read(inst.rn, pc),
                               read(inst.rm, pc), False)
            elif m is Mnemonic.TST:
                res = alu_eval(Mnemonic.AND, read(inst.rn, pc),
                               read(inst.rm, pc), c_in, v_in)
            elif m is Mnemonic.RSB:
                res = alu_eval(Mnemonic.SUB, 0, read(inst.rm, pc), True)
                wb = (inst.rd, res.value)
            else:
                res = alu_eval(m, read(inst.rd, pc), read(inst.rm, pc),
                               c_in, v_in)
                wb = (inst.rd, res.value)

        elif f is Form.MEM_IMM5 or f is Form.PC_LITERAL:
            if f is Form.PC_LITERAL:
                addr = ((pc + 4) & ~3) + inst.imm * 4
                size = 4
                load = True
            else:
                scale, size = _MEM_SCALE[m]
                addr = (read(inst.rn, pc) + inst.imm * scale) & MASK32
                load = m in (Mnemonic.LDR, Mnemonic.LDRB)
            if load:
                self.lsu = {"pc": pc, "inst": inst, "addr": addr,
                            "size": size, "load": True, "intent": None}
                self.mode = _LSU
                return None, BusRequest(addr, size, False)
            data = read(inst.rd, pc) & ((1 << (size * 8)) - 1)
            intent = ("write", addr, size, data)
            req_size, req_data = size, data
            if self.bug is BugId.LSU_SIZE and size == 1:
                req_size, req_data = 4, read(inst.rd, pc)
            self.lsu = {"pc": pc, "inst": inst, "addr": addr,
                        "size": size, "load": False, "intent": intent}
            self.mode = _LSU
            return None, BusRequest(addr, req_size, True, req_data)

        elif f is Form.BRANCH:
            taken = condition_passed(inst.cond, bool(apsr & 8), bool(apsr & 4),
                                     c_in, v_in)
            if taken:
                self._branch_to((pc + 4 + branch_offset(inst)) & MASK32)
            return self._retire(pc, inst, None, None, None), None

        elif f is Form.BX:
            val = read(inst.rm, pc)
            if val == EXC_RETURN:
                if self.arch.ipsr == 0:
                    return self._fault(pc, inst), None
                self._flush()
                self.exc = {"bx_pc": pc, "inst": inst,
                            "old_ipsr": self.arch.ipsr, "kind": None,
                            "num": 0, "idx": 0, "outstanding": False,
                            "frame": [], "sp": 0, "sp_new": 0}
                self.mode = _RET_WAIT
                return None, None
            if (val & 0xF0000000) == 0xF0000000 or (val & 1) == 0:
                return self._fault(pc, inst), None
            self._branch_to(val & ~1 & MASK32)
            return self._retire(pc, inst, None, None, None), None

        # NOP falls through with no effects

        if res is not None:
            z = res.z
            if self.bug is BugId.FLAG_Z16:
                z = (res.value & 0xFFFF) == 0
            self.arch.apsr = pack_flags(res.n, z, res.c, res.v)
        return self._retire(pc, inst, wb, None, None), None
