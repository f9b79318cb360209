"""Byte-addressed memory with per-region wait states and two bus ports.

Little-endian storage.  Each port (ICODE, DCODE) runs a one-transfer
state machine: a request accepted at cycle N gets its data phase from
cycle N+1 on, extended by the region's wait states (hready low for
exactly that many cycles).  Out-of-map accesses produce the two-cycle
AHB error sequence (hready=0/hresp=ERROR then hready=1/hresp=ERROR).

Direct read()/write() bypass the bus timing for the driver, the reset
sequence, and the reference model.
"""

from __future__ import annotations

from .bus import BusReply, BusRequest, ICODE, RESP_ERROR, RESP_OKAY
from .errors import ImageOverlap, M3lvError, MemoryFault


class Region:
    __slots__ = ("name", "base", "size", "wait_states", "data")

    def __init__(self, name: str, base: int, size: int, wait_states: int = 0):
        if base % 4 or size % 4:
            raise M3lvError(f"region {name}: base/size must be word-aligned")
        if not 0 <= wait_states <= 3:
            raise M3lvError(f"region {name}: wait states {wait_states} outside 0..3")
        self.name = name
        self.base = base
        self.size = size
        self.wait_states = wait_states
        self.data = bytearray(size)

    @property
    def end(self) -> int:
        return self.base + self.size


class _Port:
    __slots__ = ("req", "countdown", "error")

    def __init__(self):
        self.req: BusRequest | None = None
        self.countdown = 0
        self.error = 0  # 0 = no error, then counts error cycles 2 -> 1


class MemoryModel:
    def __init__(self, regions: list[Region]):
        self.regions = regions
        self._ports = {"I": _Port(), "D": _Port()}

    # ------------------------------------------------------------ direct

    def region_for(self, addr: int, size: int) -> Region | None:
        for reg in self.regions:
            if reg.base <= addr and addr + size <= reg.end:
                return reg
        return None

    def read(self, addr: int, size: int) -> int:
        reg = self.region_for(addr, size)
        if reg is None:
            raise MemoryFault(addr, size, write=False)
        off = addr - reg.base
        return int.from_bytes(reg.data[off:off + size], "little")

    def write(self, addr: int, size: int, value: int) -> None:
        reg = self.region_for(addr, size)
        if reg is None:
            raise MemoryFault(addr, size, write=True)
        off = addr - reg.base
        reg.data[off:off + size] = (value & ((1 << (size * 8)) - 1)).to_bytes(size, "little")

    def read_word(self, addr: int) -> int:
        return self.read(addr, 4)

    # --------------------------------------------------------- bus ports

    def inflight(self, port: str) -> BusRequest | None:
        return self._ports[port].req

    def accept(self, port: str, req: BusRequest | None) -> None:
        """Latch the address phase presented this cycle (None = idle)."""
        if req is None:
            return
        p = self._ports[port]
        if p.req is not None:
            raise M3lvError(f"port {port}: request while transfer in flight")
        p.req = req
        reg = self.region_for(req.addr, req.size)
        if reg is None:
            p.error = 2
            p.countdown = 0
        else:
            p.error = 0
            p.countdown = reg.wait_states

    def reply(self, port: str) -> BusReply | None:
        """Advance the port one data-phase cycle; None when idle."""
        p = self._ports[port]
        req = p.req
        if req is None:
            return None
        if p.error:
            p.error -= 1
            if p.error:
                return BusReply(ready=False, rdata=0, resp=RESP_ERROR)
            p.req = None
            return BusReply(ready=True, rdata=0, resp=RESP_ERROR)
        if p.countdown:
            p.countdown -= 1
            return BusReply(ready=False, rdata=0, resp=RESP_OKAY)
        p.req = None
        if req.write:
            self.write(req.addr, req.size, req.wdata)
            return BusReply(ready=True, rdata=0, resp=RESP_OKAY)
        return BusReply(ready=True, rdata=self.read(req.addr, req.size), resp=RESP_OKAY)


def memory_step(mem: MemoryModel, req: BusRequest | None,
                port: str = ICODE) -> BusReply | None:
    """One bus cycle on a single port: reply to the in-flight transfer,
    then accept the newly presented request.  Convenience wrapper used by
    unit tests and simple hosts."""
    rsp = mem.reply(port)
    mem.accept(port, req)
    return rsp


# --------------------------------------------------------- program image

def parse_image(text: str) -> dict[int, int]:
    """Parse `ADDR: HALFWORD` lines (lowercase hex, # comments)."""
    image: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            addr_s, half_s = line.split(":")
            addr = int(addr_s.strip(), 16)
            half = int(half_s.strip(), 16)
        except ValueError:
            raise M3lvError(f"image line {lineno}: expected 'ADDR: HALFWORD'") from None
        if addr % 2:
            raise M3lvError(f"image line {lineno}: address {addr:#x} not halfword-aligned")
        if not 0 <= half <= 0xFFFF:
            raise M3lvError(f"image line {lineno}: halfword {half:#x} out of range")
        image[addr] = half
    return image


def format_image(image: dict[int, int]) -> str:
    lines = [f"{addr:08x}: {half:04x}" for addr, half in sorted(image.items())]
    return "\n".join(lines) + "\n" if lines else ""


def load_image(mem: MemoryModel, image: dict[int, int]) -> None:
    for addr, half in image.items():
        try:
            mem.write(addr, 2, half)
        except MemoryFault as exc:
            raise ImageOverlap(f"image halfword at 0x{addr:08x} outside map") from exc


def default_memory(code_ws: int = 0, data_ws: int = 0,
                   code_size: int = 0x10000, data_size: int = 0x10000) -> MemoryModel:
    """Standard map: code at 0x0000_0000, SRAM at 0x2000_0000."""
    return MemoryModel([
        Region("code", 0x0000_0000, code_size, code_ws),
        Region("sram", 0x2000_0000, data_size, data_ws),
    ])
