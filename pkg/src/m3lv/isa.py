"""16-bit Thumb subset: encodings, ALU, and barrel shifter.

The supported subset ("M3-lite") and its T1 bit patterns:

    form        pattern                 instructions
    ---------   ---------------------   ------------------------------------
    SHIFT_IMM   000 oo iiiii mmm ddd    LSLS/LSRS/ASRS Rd, Rm, #imm5
    REG3        000110 m mmn nn ddd     ADDS/SUBS Rd, Rn, Rm   (op bit 9)
    IMM3        000111 i iin nn ddd     ADDS/SUBS Rd, Rn, #imm3
    IMM8        001 oo ddd iiiiiiii     MOVS/CMP/ADDS/SUBS Rd(n), #imm8
    DP          010000 oooo mmm ddd     AND EOR LSL LSR ASR ADC SBC ROR
                                        TST RSB CMP CMN ORR MUL BIC MVN
    BX          010001110 mmmm 000      BX Rm (Rm may be 8..15)
    PC_LITERAL  01001 ttt iiiiiiii      LDR Rt, [PC, #imm8*4]
    MEM_IMM5    011 B L iiiii nnn ttt   STR/LDR (B=0, *4) STRB/LDRB (B=1)
    BKPT        10111110 iiiiiiii       BKPT #imm8 (halt sentinel)
    NOP         10111111 00000000       NOP
    BRANCH      1101 cccc iiiiiiii      B<cond>, cond 0..13
    BRANCH      11100 iiiiiiiiiii       B (cond field reads as AL/14)

Everything else, including every 32-bit prefix (11101/11110/11111),
raises UndefinedError.  Instruction.imm always holds the raw field value;
executors apply scaling and special cases (MEM_IMM5 word offsets are
imm*4, branch offsets sign-extend then double, LSR/ASR imm5=0 means a
shift of 32).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import RangeError, UndefinedError

MASK32 = 0xFFFFFFFF
BIT31 = 0x80000000

COND_NAMES = ["EQ", "NE", "CS", "CC", "MI", "PL", "VS", "VC",
              "HI", "LS", "GE", "LT", "GT", "LE", "AL"]
COND_AL = 14


class Mnemonic(Enum):
    MOV = "MOV"
    CMP = "CMP"
    ADD = "ADD"
    SUB = "SUB"
    AND = "AND"
    EOR = "EOR"
    LSL = "LSL"
    LSR = "LSR"
    ASR = "ASR"
    ADC = "ADC"
    SBC = "SBC"
    ROR = "ROR"
    TST = "TST"
    RSB = "RSB"
    CMN = "CMN"
    ORR = "ORR"
    MUL = "MUL"
    BIC = "BIC"
    MVN = "MVN"
    LDR = "LDR"
    STR = "STR"
    LDRB = "LDRB"
    STRB = "STRB"
    B = "B"
    BX = "BX"
    NOP = "NOP"
    BKPT = "BKPT"


class Form(Enum):
    SHIFT_IMM = "shift_imm"    # Rd, Rm, #imm5
    REG3 = "reg3"              # Rd, Rn, Rm
    IMM3 = "imm3"              # Rd, Rn, #imm3
    IMM8 = "imm8"              # Rd(n), #imm8 (also BKPT payload)
    DP = "dp"                  # Rdn, Rm two-register data processing
    BX = "bx"                  # Rm (0..15)
    PC_LITERAL = "pc_literal"  # Rt, [PC, #imm8*4]
    MEM_IMM5 = "mem_imm5"      # Rt, [Rn, #imm5(*4 for word)]
    BRANCH = "branch"          # cond + imm8 or AL + imm11
    IMPLIED = "implied"        # NOP


# bits[9:6] of the DP group, in encoding order
_DP_OPS = [Mnemonic.AND, Mnemonic.EOR, Mnemonic.LSL, Mnemonic.LSR,
           Mnemonic.ASR, Mnemonic.ADC, Mnemonic.SBC, Mnemonic.ROR,
           Mnemonic.TST, Mnemonic.RSB, Mnemonic.CMP, Mnemonic.CMN,
           Mnemonic.ORR, Mnemonic.MUL, Mnemonic.BIC, Mnemonic.MVN]
_DP_INDEX = {m: i for i, m in enumerate(_DP_OPS)}

_IMM8_OPS = [Mnemonic.MOV, Mnemonic.CMP, Mnemonic.ADD, Mnemonic.SUB]
_SHIFT_OPS = [Mnemonic.LSL, Mnemonic.LSR, Mnemonic.ASR]


@dataclass(frozen=True, slots=True)
class Instruction:
    """One decoded operation; imm is the raw encoding field."""

    mnemonic: Mnemonic
    form: Form
    rd: int = 0
    rn: int = 0
    rm: int = 0
    imm: int = 0
    cond: int = COND_AL

    def __str__(self) -> str:
        m, f = self.mnemonic, self.form
        if f is Form.SHIFT_IMM:
            return f"{m.value}S r{self.rd}, r{self.rm}, #{self.imm}"
        if f is Form.REG3:
            return f"{m.value}S r{self.rd}, r{self.rn}, r{self.rm}"
        if f is Form.IMM3:
            return f"{m.value}S r{self.rd}, r{self.rn}, #{self.imm}"
        if f is Form.IMM8:
            if m is Mnemonic.BKPT:
                return f"BKPT #{self.imm}"
            reg = self.rn if m is Mnemonic.CMP else self.rd
            s = "" if m is Mnemonic.CMP else "S"
            return f"{m.value}{s} r{reg}, #{self.imm}"
        if f is Form.DP:
            if m in (Mnemonic.CMP, Mnemonic.CMN, Mnemonic.TST):
                return f"{m.value} r{self.rn}, r{self.rm}"
            return f"{m.value}S r{self.rd}, r{self.rm}"
        if f is Form.BX:
            return f"BX r{self.rm}"
        if f is Form.PC_LITERAL:
            return f"LDR r{self.rd}, [PC, #{self.imm * 4}]"
        if f is Form.MEM_IMM5:
            scale = 4 if m in (Mnemonic.LDR, Mnemonic.STR) else 1
            return f"{m.value} r{self.rd}, [r{self.rn}, #{self.imm * scale}]"
        if f is Form.BRANCH:
            suffix = "" if self.cond == COND_AL else COND_NAMES[self.cond]
            return f"B{suffix} #{self.imm}"
        return m.value


def branch_offset(inst: Instruction) -> int:
    """Signed byte offset relative to (pc + 4) of a BRANCH instruction."""
    if inst.cond == COND_AL:
        v = inst.imm - 0x800 if inst.imm & 0x400 else inst.imm
    else:
        v = inst.imm - 0x100 if inst.imm & 0x80 else inst.imm
    return v * 2


# ---------------------------------------------------------------- decode

def decode(halfword: int) -> Instruction:
    """Decode one halfword; total over 0..0xFFFF (decodes or raises)."""
    h = halfword
    if not 0 <= h <= 0xFFFF:
        raise RangeError(f"halfword out of range: {h:#x}")
    top3 = h >> 13

    if top3 == 0b000:
        op = (h >> 11) & 3
        if op == 3:
            rd, rn, x = h & 7, (h >> 3) & 7, (h >> 6) & 7
            sub = (h >> 9) & 1
            m = Mnemonic.SUB if sub else Mnemonic.ADD
            if (h >> 10) & 1:
                return Instruction(m, Form.IMM3, rd=rd, rn=rn, imm=x)
            return Instruction(m, Form.REG3, rd=rd, rn=rn, rm=x)
        return Instruction(_SHIFT_OPS[op], Form.SHIFT_IMM,
                           rd=h & 7, rm=(h >> 3) & 7, imm=(h >> 6) & 0x1F)

    if top3 == 0b001:
        m = _IMM8_OPS[(h >> 11) & 3]
        reg, imm8 = (h >> 8) & 7, h & 0xFF
        if m is Mnemonic.CMP:
            return Instruction(m, Form.IMM8, rn=reg, imm=imm8)
        if m is Mnemonic.MOV:
            return Instruction(m, Form.IMM8, rd=reg, imm=imm8)
        return Instruction(m, Form.IMM8, rd=reg, rn=reg, imm=imm8)

    if top3 == 0b010:
        if (h >> 10) == 0b010000:
            m = _DP_OPS[(h >> 6) & 0xF]
            low, rm = h & 7, (h >> 3) & 7
            return Instruction(m, Form.DP, rd=low, rn=low, rm=rm)
        if (h >> 10) == 0b010001:
            if (h >> 7) == 0b010001110 and (h & 7) == 0:
                return Instruction(Mnemonic.BX, Form.BX, rm=(h >> 3) & 0xF)
            raise UndefinedError(h, "hi-register ops / BLX outside subset")
        if (h >> 11) == 0b01001:
            return Instruction(Mnemonic.LDR, Form.PC_LITERAL,
                               rd=(h >> 8) & 7, imm=h & 0xFF)
        raise UndefinedError(h, "register-offset load/store outside subset")

    if top3 == 0b011:
        byte, load = (h >> 12) & 1, (h >> 11) & 1
        m = (Mnemonic.LDRB if byte else Mnemonic.LDR) if load else \
            (Mnemonic.STRB if byte else Mnemonic.STR)
        return Instruction(m, Form.MEM_IMM5,
                           rd=h & 7, rn=(h >> 3) & 7, imm=(h >> 6) & 0x1F)

    if top3 == 0b100:
        raise UndefinedError(h, "halfword / SP-relative load/store outside subset")

    if top3 == 0b101:
        if (h >> 8) == 0xBE:
            return Instruction(Mnemonic.BKPT, Form.IMM8, imm=h & 0xFF)
        if h == 0xBF00:
            return Instruction(Mnemonic.NOP, Form.IMPLIED)
        raise UndefinedError(h, "misc 0b1011 encodings outside subset")

    if top3 == 0b110:
        if (h >> 12) == 0b1101:
            cond = (h >> 8) & 0xF
            if cond == 0b1110:
                raise UndefinedError(h, "permanently undefined (UDF)")
            if cond == 0b1111:
                raise UndefinedError(h, "SVC outside subset")
            return Instruction(Mnemonic.B, Form.BRANCH, imm=h & 0xFF, cond=cond)
        raise UndefinedError(h, "LDM/STM outside subset")

    if (h >> 11) == 0b11100:
        return Instruction(Mnemonic.B, Form.BRANCH, imm=h & 0x7FF, cond=COND_AL)
    raise UndefinedError(h, "32-bit Thumb-2 prefix outside subset")


_DECODE_CACHE: dict[int, Instruction] = {}


def decode_cached(halfword: int) -> Instruction:
    """decode() memoized over the 16-bit space (raises are not cached)."""
    inst = _DECODE_CACHE.get(halfword)
    if inst is None:
        inst = decode(halfword)
        _DECODE_CACHE[halfword] = inst
    return inst


# ---------------------------------------------------------------- encode

def _field(val: int, width: int, what: str) -> int:
    if not 0 <= val < (1 << width):
        raise RangeError(f"{what}={val} exceeds {width}-bit field")
    return val


def _low(reg: int, what: str) -> int:
    if not 0 <= reg <= 7:
        raise RangeError(f"{what}=r{reg} must be a low register (r0-r7)")
    return reg


def encode(inst: Instruction) -> int:
    """Encode a well-formed Instruction; decode(encode(i)) == i."""
    m, f = inst.mnemonic, inst.form

    if f is Form.SHIFT_IMM:
        if m not in _SHIFT_OPS:
            raise RangeError(f"{m.value} has no shift-immediate form")
        return (_SHIFT_OPS.index(m) << 11) | (_field(inst.imm, 5, "imm5") << 6) \
            | (_low(inst.rm, "rm") << 3) | _low(inst.rd, "rd")

    if f in (Form.REG3, Form.IMM3):
        if m not in (Mnemonic.ADD, Mnemonic.SUB):
            raise RangeError(f"{m.value} has no three-operand form")
        base = 0x1800 | ((m is Mnemonic.SUB) << 9)
        if f is Form.IMM3:
            x = _field(inst.imm, 3, "imm3")
            base |= 1 << 10
        else:
            x = _low(inst.rm, "rm")
        return base | (x << 6) | (_low(inst.rn, "rn") << 3) | _low(inst.rd, "rd")

    if f is Form.IMM8:
        if m is Mnemonic.BKPT:
            return 0xBE00 | _field(inst.imm, 8, "imm8")
        if m not in _IMM8_OPS:
            raise RangeError(f"{m.value} has no 8-bit immediate form")
        if m is Mnemonic.CMP:
            reg = inst.rn
        else:
            reg = inst.rd
            if m is not Mnemonic.MOV and inst.rn != inst.rd:
                raise RangeError(f"{m.value} imm8 form is in-place (rn must equal rd)")
        return 0x2000 | (_IMM8_OPS.index(m) << 11) \
            | (_low(reg, "rd") << 8) | _field(inst.imm, 8, "imm8")

    if f is Form.DP:
        if m not in _DP_INDEX:
            raise RangeError(f"{m.value} is not a two-register data-processing op")
        low = inst.rn if m in (Mnemonic.CMP, Mnemonic.CMN, Mnemonic.TST) else inst.rd
        if inst.rn != inst.rd and m not in (Mnemonic.CMP, Mnemonic.CMN, Mnemonic.TST):
            raise RangeError(f"{m.value} register form is in-place (rn must equal rd)")
        return 0x4000 | (_DP_INDEX[m] << 6) | (_low(inst.rm, "rm") << 3) | _low(low, "rdn")

    if f is Form.BX:
        if m is not Mnemonic.BX:
            raise RangeError(f"{m.value} has no BX form")
        return 0x4700 | (_field(inst.rm, 4, "rm") << 3)

    if f is Form.PC_LITERAL:
        if m is not Mnemonic.LDR:
            raise RangeError(f"{m.value} has no PC-literal form")
        return 0x4800 | (_low(inst.rd, "rt") << 8) | _field(inst.imm, 8, "imm8")

    if f is Form.MEM_IMM5:
        try:
            byte = {Mnemonic.STR: 0, Mnemonic.LDR: 0,
                    Mnemonic.STRB: 1, Mnemonic.LDRB: 1}[m]
        except KeyError:
            raise RangeError(f"{m.value} has no immediate-offset memory form") from None
        load = m in (Mnemonic.LDR, Mnemonic.LDRB)
        return 0x6000 | (byte << 12) | (load << 11) | (_field(inst.imm, 5, "imm5") << 6) \
            | (_low(inst.rn, "rn") << 3) | _low(inst.rd, "rt")

    if f is Form.BRANCH:
        if m is not Mnemonic.B:
            raise RangeError(f"{m.value} has no branch form")
        if inst.cond == COND_AL:
            return 0xE000 | _field(inst.imm, 11, "imm11")
        if not 0 <= inst.cond <= 13:
            raise RangeError(f"branch condition {inst.cond} outside 0..13")
        return 0xD000 | (inst.cond << 8) | _field(inst.imm, 8, "imm8")

    if f is Form.IMPLIED:
        if m is Mnemonic.NOP:
            return 0xBF00
        raise RangeError(f"{m.value} has no implied form")

    raise RangeError(f"unencodable form {f}")


# ------------------------------------------------------------- ALU core

@dataclass(frozen=True, slots=True)
class AluResult:
    value: int
    n: bool
    z: bool
    c: bool
    v: bool


# every accepted op name, normalized to the two arithmetic cores or a
# logical/multiply op; compare/test aliases resolve to their flag twins
_ALU_ALIAS = {
    "ADD": "ADD", "ADC": "ADD", "CMN": "ADD",
    "SUB": "SUB", "SBC": "SUB", "CMP": "SUB", "RSB": "SUB",
    "AND": "AND", "TST": "AND",
    "EOR": "EOR", "ORR": "ORR", "BIC": "BIC",
    "MVN": "MVN", "MOV": "MOV", "MUL": "MUL",
}


def alu_eval(op, a: int, b: int, carry_in: bool = False,
             overflow_in: bool = False) -> AluResult:
    """32-bit data-processing step.

    Add family computes a + b + carry_in; sub family a + NOT(b) + carry_in
    (pass carry_in=1 for plain SUB/CMP/RSB, the current C for SBC).  C is
    the unsigned carry-out and V the signed overflow.  Logical ops and MUL
    return C = carry_in and V = overflow_in so the caller's flags pass
    through unchanged.
    """
    name = op.value if isinstance(op, Mnemonic) else str(op).upper()
    kind = _ALU_ALIAS.get(name)
    if kind is None:
        raise ValueError(f"not a data-processing op: {op!r}")
    a &= MASK32
    b &= MASK32

    if kind in ("ADD", "SUB"):
        bb = b if kind == "ADD" else b ^ MASK32
        total = a + bb + (1 if carry_in else 0)
        value = total & MASK32
        c = bool(total >> 32)
        v = bool((~(a ^ bb) & (a ^ value)) & BIT31)
    else:
        if kind == "AND":
            value = a & b
        elif kind == "EOR":
            value = a ^ b
        elif kind == "ORR":
            value = a | b
        elif kind == "BIC":
            value = a & (b ^ MASK32)
        elif kind == "MVN":
            value = b ^ MASK32
        elif kind == "MOV":
            value = b
        else:  # MUL
            value = (a * b) & MASK32
        c = bool(carry_in)
        v = bool(overflow_in)

    return AluResult(value, bool(value & BIT31), value == 0, c, v)


def shifter_eval(kind, a: int, amount: int, carry_in: bool) -> tuple[int, bool]:
    """Barrel shifter with architectural >=32 saturation rules.

    amount 0 returns (a, carry_in) for every kind.  LSL/LSR >= 32 produce
    0 (carry = last bit shifted out, 0 beyond 32); ASR >= 32 sign-fills;
    ROR uses amount mod 32 with carry = bit 31 of the result.
    """
    name = kind.value if isinstance(kind, Mnemonic) else str(kind).upper()
    a &= MASK32
    if not 0 <= amount <= 255:
        raise ValueError(f"shift amount {amount} outside 0..255")
    if amount == 0:
        return a, bool(carry_in)

    if name == "LSL":
        if amount < 32:
            return (a << amount) & MASK32, bool((a >> (32 - amount)) & 1)
        return 0, bool(a & 1) if amount == 32 else False
    if name == "LSR":
        if amount < 32:
            return a >> amount, bool((a >> (amount - 1)) & 1)
        return 0, bool(a & BIT31) if amount == 32 else False
    if name == "ASR":
        if amount < 32:
            sign = -(a >> 31) << 32
            return ((a | sign) >> amount) & MASK32, bool((a >> (amount - 1)) & 1)
        return (MASK32 if a & BIT31 else 0), bool(a & BIT31)
    if name == "ROR":
        r = amount & 31
        value = a if r == 0 else ((a >> r) | (a << (32 - r))) & MASK32
        return value, bool(value & BIT31)
    raise ValueError(f"not a shift kind: {kind!r}")


def condition_passed(cond: int, n: bool, z: bool, c: bool, v: bool) -> bool:
    """ARM condition-code test (cond 0..14)."""
    if cond == 0:
        return z
    if cond == 1:
        return not z
    if cond == 2:
        return c
    if cond == 3:
        return not c
    if cond == 4:
        return n
    if cond == 5:
        return not n
    if cond == 6:
        return v
    if cond == 7:
        return not v
    if cond == 8:
        return c and not z
    if cond == 9:
        return (not c) or z
    if cond == 10:
        return n == v
    if cond == 11:
        return n != v
    if cond == 12:
        return (not z) and (n == v)
    if cond == 13:
        return z or (n != v)
    if cond == 14:
        return True
    raise ValueError(f"condition code {cond} outside 0..14")
