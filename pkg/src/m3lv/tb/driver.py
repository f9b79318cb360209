"""Driver: turns stimulus items into memory images and NVIC timelines.

Assembles the instruction stream at the code base, writes the vector
table (initial SP, reset vector, per-line handler vectors), synthesizes
handler routines for every interrupt line in play, applies config items
to the NVIC, and schedules irq events by cycle.  Handlers only touch
r0-r3 (restored by the exception frame) and end with BX LR, so they are
transparent to the interrupted thread.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from ..errors import ImageOverlap, M3lvError
from ..isa import Form, Instruction, Mnemonic, encode
from ..memory import MemoryModel
from ..nvic import EXTERNAL_BASE, Nvic
from .generator import KIND_CONFIG, KIND_INSTRUCTION, KIND_IRQ, StimulusItem


@dataclass
class Layout:
    vector_base: int = 0x0
    code_base: int = 0x100
    sp_top: int = 0x2000_FF00


@dataclass
class DriveResult:
    program_len: int                        # instructions incl. halt sentinel
    schedule: dict[int, list[tuple[int, str, int]]]
    handler_addrs: dict[int, int]
    image: dict[int, int] = field(default_factory=dict)


def default_handler(line: int) -> list[Instruction]:
    return [
        Instruction(Mnemonic.MOV, Form.IMM8, rd=0, imm=line & 0xFF),
        Instruction(Mnemonic.ADD, Form.REG3, rd=0, rn=0, rm=0),
        Instruction(Mnemonic.SUB, Form.IMM8, rd=0, rn=0, imm=1),
        Instruction(Mnemonic.BX, Form.BX, rm=14),
    ]


def drive(items: list[StimulusItem], memory: MemoryModel, nvic: Nvic,
          layout: Layout | None = None,
          handlers: dict[int, list[Instruction]] | None = None) -> DriveResult:
    layout = layout or Layout()
    program = [it.inst for it in items if it.kind == KIND_INSTRUCTION]
    if not program:
        raise M3lvError("no instruction items to drive")

    code_region = memory.region_for(layout.code_base, 2)
    if code_region is None:
        raise ImageOverlap(f"code base 0x{layout.code_base:08x} unmapped")

    schedule: dict[int, list[tuple[int, str, int]]] = {}
    lines_in_play: set[int] = set()
    for it in items:
        if it.kind == KIND_CONFIG:
            line, enabled, prio = it.config
            nvic.set_enabled(line, enabled)
            nvic.set_priority(line, prio)
            lines_in_play.add(line)
        elif it.kind == KIND_IRQ:
            cycle, line, action = it.irq
            schedule.setdefault(cycle, []).append((line, action, 0))
            lines_in_play.add(line)

    image: dict[int, int] = {}

    def place(base: int, instructions: list[Instruction]) -> None:
        end = base + 2 * len(instructions)
        if end > code_region.end:
            raise ImageOverlap(
                f"program end 0x{end:08x} beyond code region 0x{code_region.end:08x}")
        for i, inst in enumerate(instructions):
            image[base + 2 * i] = encode(inst)

    place(layout.code_base, program)

    handler_addrs: dict[int, int] = {}
    next_addr = (layout.code_base + 2 * len(program) + 3) & ~3
    for line in sorted(lines_in_play):
        body = (handlers or {}).get(line) or default_handler(line)
        place(next_addr, body)
        handler_addrs[line] = next_addr
        next_addr = (next_addr + 2 * len(body) + 3) & ~3

    vt_words = {0: layout.sp_top, 1: layout.code_base | 1}
    for line, addr in handler_addrs.items():
        vt_words[EXTERNAL_BASE + line] = addr | 1
    vt_end = layout.vector_base + 4 * (max(vt_words) + 1)
    if vt_end > layout.code_base:
        raise ImageOverlap("vector table collides with the code base")
    for idx, word in vt_words.items():
        memory.write(layout.vector_base + 4 * idx, 4, word)

    for addr, half in image.items():
        memory.write(addr, 2, half)

    return DriveResult(len(program), schedule, handler_addrs, image)


# ------------------------------------------------- interrupt stimulus file

def parse_irq_csv(text: str) -> list[tuple[int, int, str]]:
    """Rows `cycle,line,action`, action in pend/clear/enable/disable/prio:<n>."""
    rows: list[tuple[int, int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.lower().startswith("cycle,"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise M3lvError(f"irq file line {lineno}: expected cycle,line,action")
        try:
            cycle, irq_line = int(parts[0]), int(parts[1])
        except ValueError:
            raise M3lvError(f"irq file line {lineno}: bad number") from None
        action = parts[2]
        if action not in ("pend", "clear", "enable", "disable"):
            if not action.startswith("prio:") or not action[5:].isdigit():
                raise M3lvError(f"irq file line {lineno}: unknown action {action!r}")
        rows.append((cycle, irq_line, action))
    return rows


def load_irq_file(path: str) -> list[tuple[int, int, str]]:
    with open(path) as f:
        return parse_irq_csv(f.read())


def save_irq_file(path: str, rows: list[tuple[int, int, str]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cycle", "line", "action"])
        for cycle, line, action in rows:
            w.writerow([cycle, line, action])


def apply_irq_action(nvic: Nvic, line: int, action: str) -> None:
    if action == "pend":
        nvic.set_pending(line)
    elif action == "clear":
        nvic.clear_pending(line)
    elif action == "enable":
        nvic.set_enabled(line, True)
    elif action == "disable":
        nvic.set_enabled(line, False)
    elif action.startswith("prio:"):
        nvic.set_priority(line, int(action[5:]))
    else:
        raise M3lvError(f"unknown irq action {action!r}")
