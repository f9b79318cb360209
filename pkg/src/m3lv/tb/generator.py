"""Constrained-random stimulus generation.

Programs are built from templates so every constraint holds by
construction:

  * load/store templates materialize their base register immediately
    before the access (MOVS/LSLS/ADDS constant synthesis), so the
    effective address provably lands inside the configured window;
  * branches are patched to land only on template start boundaries,
    forward-only, which both keeps targets inside the program and
    guarantees the stream reaches the final halt sentinel;
  * every program ends with the halt sentinel (BKPT).

Identical configuration (seed included) yields an identical item list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InfeasibleConstraint
from ..isa import COND_AL, Form, Instruction, Mnemonic, encode
from ..util import Rng

KIND_INSTRUCTION = "instruction"
KIND_IRQ = "irq"
KIND_CONFIG = "config"


@dataclass(frozen=True, slots=True)
class StimulusItem:
    kind: str
    seq_id: int
    inst: Instruction | None = None
    irq: tuple[int, int, str] | None = None      # (cycle, line, action)
    config: tuple[int, bool, int] | None = None  # (line, enabled, priority)


DEFAULT_WEIGHTS = {
    "MOV": 6.0, "CMP": 2.0, "ADD": 6.0, "SUB": 4.0,
    "AND": 2.0, "EOR": 2.0, "LSL": 3.0, "LSR": 3.0, "ASR": 2.0,
    "ADC": 2.0, "SBC": 2.0, "ROR": 2.0, "TST": 1.0, "RSB": 1.0,
    "CMN": 1.0, "ORR": 2.0, "MUL": 2.0, "BIC": 1.0, "MVN": 1.0,
    "LDR": 3.0, "STR": 3.0, "LDRB": 1.5, "STRB": 1.5, "NOP": 0.5,
}

_MEM_MNEMONICS = ("LDR", "STR", "LDRB", "STRB")
_IMM8_MAX = 255
_IMM3_MAX = 7
_IMM5_MAX = 31


@dataclass
class GeneratorConfig:
    seed: int = 0
    count: int = 100
    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    reg_lo: int = 0
    reg_hi: int = 7
    imm_corner_bias: float = 0.35
    mem_window: tuple[int, int] = (0x2000_0100, 0x200)
    branch_density: float = 0.08
    irq_rate: float = 0.0
    n_irq_lines: int = 4
    code_base: int = 0x100

    def validate(self) -> None:
        if self.count < 1:
            raise InfeasibleConstraint("count must be >= 1")
        if any(w < 0 for w in self.weights.values()):
            raise InfeasibleConstraint("opcode weights must be nonnegative")
        if not any(w > 0 for w in self.weights.values()):
            raise InfeasibleConstraint("at least one opcode weight must be positive")
        if not 0 <= self.reg_lo <= self.reg_hi <= 7:
            raise InfeasibleConstraint("register range must be within r0..r7")
        base, size = self.mem_window
        if size < 4 or base % 4:
            raise InfeasibleConstraint("memory window must be word-aligned, >= 4 bytes")
        unknown = [m for m in self.weights
                   if m not in Mnemonic.__members__
                   or m in ("B", "BX", "BKPT")]
        if unknown:
            raise InfeasibleConstraint(f"unweightable mnemonics: {unknown}")


def synth_const(reg: int, value: int) -> list[Instruction]:
    """MOVS/LSLS/ADDS sequence leaving `value` in `reg` (1..7 instrs)."""
    chunks = [(value >> s) & 0xFF for s in (24, 16, 8, 0)]
    while len(chunks) > 1 and chunks[0] == 0:
        chunks.pop(0)
    seq = [Instruction(Mnemonic.MOV, Form.IMM8, rd=reg, imm=chunks[0])]
    for b in chunks[1:]:
        seq.append(Instruction(Mnemonic.LSL, Form.SHIFT_IMM, rd=reg, rm=reg, imm=8))
        if b:
            seq.append(Instruction(Mnemonic.ADD, Form.IMM8, rd=reg, rn=reg, imm=b))
    return seq


class _Builder:
    def __init__(self, cfg: GeneratorConfig):
        self.cfg = cfg
        self.rng = Rng(cfg.seed).fork(1)
        self.templates: list[list] = []   # lists of Instruction or "branch" mark
        self.total = 0
        self.branch_marks: list[tuple[int, int, int]] = []  # (tpl idx, cond, bias)

    # operand draws ------------------------------------------------------

    def _reg(self) -> int:
        return self.rng.between(self.cfg.reg_lo, self.cfg.reg_hi)

    def _imm(self, maxval: int) -> int:
        if self.rng.chance(self.cfg.imm_corner_bias):
            return self.rng.choice((0, 1, maxval))
        return self.rng.below(maxval + 1)

    # template construction ----------------------------------------------

    def _alu_template(self, name: str) -> list[Instruction]:
        m = Mnemonic[name]
        r = self._reg
        if m is Mnemonic.NOP:
            return [Instruction(m, Form.IMPLIED)]
        if m is Mnemonic.MOV:
            return [Instruction(m, Form.IMM8, rd=r(), imm=self._imm(_IMM8_MAX))]
        if m is Mnemonic.CMP:
            if self.rng.chance(0.5):
                return [Instruction(m, Form.IMM8, rn=r(), imm=self._imm(_IMM8_MAX))]
            return [Instruction(m, Form.DP, rn=r(), rm=r())]
        if m in (Mnemonic.ADD, Mnemonic.SUB):
            pick = self.rng.below(3)
            if pick == 0:
                rd = r()
                return [Instruction(m, Form.IMM8, rd=rd, rn=rd, imm=self._imm(_IMM8_MAX))]
            if pick == 1:
                return [Instruction(m, Form.IMM3, rd=r(), rn=r(), imm=self._imm(_IMM3_MAX))]
            return [Instruction(m, Form.REG3, rd=r(), rn=r(), rm=r())]
        if m in (Mnemonic.LSL, Mnemonic.LSR, Mnemonic.ASR) and self.rng.chance(0.5):
            return [Instruction(m, Form.SHIFT_IMM, rd=r(), rm=r(),
                                imm=self._imm(_IMM5_MAX))]
        if m in (Mnemonic.CMN, Mnemonic.TST):
            return [Instruction(m, Form.DP, rn=r(), rm=r())]
        rd = r()
        return [Instruction(m, Form.DP, rd=rd, rn=rd, rm=r())]

    def _mem_template(self, name: str) -> list[Instruction]:
        m = Mnemonic[name]
        rng = self.rng
        if m is Mnemonic.LDR and rng.chance(0.25):
            return [("literal", self._reg(), rng.below(256))]  # patched later
        base, size = self.cfg.mem_window
        nbytes = 4 if m in (Mnemonic.LDR, Mnemonic.STR) else 1
        scale = nbytes
        imm5 = self._imm(_IMM5_MAX)
        span = size - nbytes
        ea = base + (rng.below(span // nbytes + 1) * nbytes if span else 0)
        base_val = ea - imm5 * scale
        if base_val < 0:
            imm5 = 0
            base_val = ea
        rb = self._reg()
        rt = self._reg()
        tpl = synth_const(rb, base_val)
        tpl.append(Instruction(m, Form.MEM_IMM5, rd=rt, rn=rb, imm=imm5))
        return tpl

    def build(self) -> list[Instruction]:
        cfg = self.cfg
        names = sorted(n for n, w in cfg.weights.items() if w > 0)
        weights = [cfg.weights[n] for n in names]
        budget = cfg.count

        while self.total < budget:
            remaining = budget - self.total
            if remaining >= 1 and self.rng.chance(cfg.branch_density):
                cond = self.rng.below(15)  # 14 encodes the unconditional form
                self.branch_marks.append((len(self.templates), cond,
                                          self.rng.u64()))
                self.templates.append(["branch"])
                self.total += 1
                continue
            name = names[self.rng.weighted(names, weights)]
            if name in _MEM_MNEMONICS:
                tpl = self._mem_template(name)
                if len(tpl) > remaining:
                    tpl = self._alu_template("MOV")
            else:
                tpl = self._alu_template(name)
            self.templates.append(tpl)
            self.total += len(tpl)

        self.templates.append([Instruction(Mnemonic.BKPT, Form.IMM8, imm=0)])

        starts = []
        pos = 0
        for tpl in self.templates:
            starts.append(pos)
            pos += len(tpl)
        program_len = pos

        # patch branches to later template starts within field range
        for tpl_idx, cond, pick in self.branch_marks:
            here = starts[tpl_idx]
            limit = here + (1025 if cond == 14 else 129)
            candidates = [s for s in starts[tpl_idx + 1:] if s <= limit]
            target = candidates[pick % len(candidates)]
            disp = target - here - 2
            if cond == 14:
                imm = disp & 0x7FF
                inst = Instruction(Mnemonic.B, Form.BRANCH, imm=imm, cond=COND_AL)
            else:
                imm = disp & 0xFF
                inst = Instruction(Mnemonic.B, Form.BRANCH, imm=imm, cond=cond)
            self.templates[tpl_idx] = [inst]

        # patch PC-literal loads now that addresses are known
        program: list[Instruction] = []
        for tpl in self.templates:
            for entry in tpl:
                if isinstance(entry, tuple) and entry[0] == "literal":
                    _, rt, raw = entry
                    pc = cfg.code_base + 2 * len(program)
                    lit_base = (pc + 4) & ~3
                    end = cfg.code_base + 2 * program_len
                    max_imm = max(0, (end - 4 - lit_base) // 4)
                    imm = raw % (max_imm + 1) if max_imm else 0
                    entry = Instruction(Mnemonic.LDR, Form.PC_LITERAL,
                                        rd=rt, imm=imm)
                program.append(entry)
        return program


def generate(cfg: GeneratorConfig) -> list[StimulusItem]:
    """Deterministic stimulus list: config items, program, irq events."""
    cfg.validate()
    items: list[StimulusItem] = []
    seq = 0

    irq_rng = Rng(cfg.seed).fork(2)
    if cfg.irq_rate > 0:
        for line in range(cfg.n_irq_lines):
            items.append(StimulusItem(KIND_CONFIG, seq,
                                      config=(line, True, irq_rng.below(256))))
            seq += 1

    program = _Builder(cfg).build()
    for inst in program:
        encode(inst)  # every generated instruction must be encodable
        items.append(StimulusItem(KIND_INSTRUCTION, seq, inst=inst))
        seq += 1

    if cfg.irq_rate > 0:
        n_events = max(1, int(cfg.count * cfg.irq_rate + 0.5))
        horizon = max(20, cfg.count * 3)
        for _ in range(n_events):
            cycle = irq_rng.between(5, horizon)
            line = irq_rng.below(cfg.n_irq_lines)
            items.append(StimulusItem(KIND_IRQ, seq, irq=(cycle, line, "pend")))
            seq += 1
    return items
