"""Data checker: unpacks retire events against observed bus transfers.

Fuses a RetireEvent with the DCODE transfers seen in its cycle window
into one high-level ArchTransaction, raising InconsistentEvent when the
low-level traffic contradicts the instruction's declared effect:

  * a load/store must produce exactly one transfer matching its kind,
    address, size, and data (the LSU_SIZE bug trips the size check);
  * exception entry must push an 8-word frame at consecutive ascending
    word-aligned addresses (an unaligned SP surfaces here), exception
    return must pop one — unless tail-chained, which moves no frame;
  * everything else must produce no data-side traffic at all.

Fault events are passed through unchecked (their traffic is the aborted
access).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..arch import EXC_ENTRY, EXC_FAULT, EXC_RETURN_KIND, RetireEvent
from ..bus import Transfer
from ..errors import InconsistentEvent


@dataclass(frozen=True, slots=True)
class ArchTransaction:
    event: RetireEvent
    transfers: tuple[Transfer, ...]

    @property
    def tail_chained(self) -> bool:
        return (self.event.exception is not None
                and self.event.exception[0] == EXC_ENTRY
                and not self.transfers)


def _check_frame(seq: int, transfers: tuple[Transfer, ...], kind: str) -> None:
    if len(transfers) != 8:
        raise InconsistentEvent(
            seq, f"exception {kind} moved {len(transfers)} transfers, want 8")
    base = transfers[0].addr
    if base % 4:
        raise InconsistentEvent(seq, f"frame base 0x{base:08x} not word-aligned")
    want = "write" if kind == EXC_ENTRY else "read"
    for i, t in enumerate(transfers):
        if t.kind != want or t.size != 4:
            raise InconsistentEvent(seq, f"frame transfer {i} is {t.kind}/{t.size}B")
        if t.addr != base + 4 * i:
            raise InconsistentEvent(
                seq, f"frame transfer {i} at 0x{t.addr:08x}, want 0x{base + 4 * i:08x}")


def check_unpack(event: RetireEvent,
                 transfers: list[Transfer]) -> ArchTransaction:
    txn = ArchTransaction(event, tuple(transfers))
    seq = event.seq

    if event.exception is not None:
        kind = event.exception[0]
        if kind == EXC_FAULT:
            return txn
        if kind == EXC_ENTRY:
            if transfers:  # tail-chained entries move nothing
                _check_frame(seq, txn.transfers, EXC_ENTRY)
            return txn
        if kind == EXC_RETURN_KIND:
            if transfers:
                _check_frame(seq, txn.transfers, EXC_RETURN_KIND)
            return txn

    if event.mem is not None:
        kind, addr, size, data = event.mem
        if not transfers:
            raise InconsistentEvent(seq, f"{kind} effect with no bus transfer")
        if len(transfers) > 1:
            raise InconsistentEvent(seq, f"{len(transfers)} transfers for one access")
        t = transfers[0]
        if t.kind != kind:
            raise InconsistentEvent(seq, f"retire says {kind}, bus shows {t.kind}")
        if t.addr != addr:
            raise InconsistentEvent(
                seq, f"retire addr 0x{addr:08x}, bus addr 0x{t.addr:08x}")
        if t.size != size:
            raise InconsistentEvent(seq, f"retire size {size}B, bus size {t.size}B")
        if t.data != data:
            raise InconsistentEvent(
                seq, f"retire data 0x{data:08x}, bus data 0x{t.data:08x}")
        return txn

    if transfers:
        raise InconsistentEvent(
            seq, f"{len(transfers)} data transfer(s) for an instruction "
                 "with no memory effect")
    return txn
