"""AHB-Lite-style signal model and passive protocol monitor.

Sample fields carry exact widths: HTRANS[1:0], HSIZE[2:0], HBURST[2:0],
HRESP[1:0], addresses/data 32 bits.  One sample per port per cycle; the
address-phase signals describe the transfer presented *this* cycle, the
data-phase signals (hready/hrdata/hresp, plus hwdata) belong to the
transfer accepted earlier, per normal AHB pipelining.

Rule table (full label assignments and rationale in docs/bus_rules.md):

    V1  address-phase or write-data fields changed while hready was low
    V2  reserved encoding (hsize > word, hburst != SINGLE, hresp > ERROR)
    V3  address not aligned to the transfer size
    V4  BUSY presented (bursts are always SINGLE in this system)
    V5  ERROR response not held for the two-cycle sequence

The monitor never drives or mutates signals; replaying a trace file
produces identical transfers and violations.
"""

from __future__ import annotations

import csv
import io
from typing import NamedTuple

from .errors import OutOfOrderSample, TraceFormatError, UnknownEncoding

ICODE = "I"
DCODE = "D"
PORTS = (ICODE, DCODE)

HTRANS_IDLE = 0b00
HTRANS_BUSY = 0b01
HTRANS_NONSEQ = 0b10
HTRANS_SEQ = 0b11

HSIZE_BYTE = 0b000
HSIZE_HALF = 0b001
HSIZE_WORD = 0b010

HBURST_SINGLE = 0b000

RESP_OKAY = 0b00
RESP_ERROR = 0b01

HTRANS_LABELS = {0b00: "IDLE", 0b01: "BUSY", 0b10: "NONSEQ", 0b11: "SEQ"}
HSIZE_LABELS = {0b000: "byte", 0b001: "half", 0b010: "word"}
HWRITE_LABELS = {0: "READ", 1: "WRITE"}
HBURST_LABELS = {0b000: "SINGLE"}
HREADY_LABELS = {0: "EXTEND", 1: "COMPLETE"}
HRESP_LABELS = {0b00: "OKAY", 0b01: "ERROR"}

SIZE_BYTES = {HSIZE_BYTE: 1, HSIZE_HALF: 2, HSIZE_WORD: 4}


class BusRequest(NamedTuple):
    """Address phase presented by a master for one single transfer."""

    addr: int
    size: int          # bytes: 1, 2, or 4
    write: bool
    wdata: int = 0


class BusReply(NamedTuple):
    """Data-phase signals returned by the slave for one cycle."""

    ready: bool
    rdata: int
    resp: int


class BusSample(NamedTuple):
    """Every bus signal visible in one cycle on one port."""

    cycle: int
    port: str
    htrans: int
    hsize: int
    hwrite: int
    hburst: int
    haddr: int
    hwdata: int
    hrdata: int
    hready: int
    hresp: int


class Classification(NamedTuple):
    htrans: str
    hsize: str
    hwrite: str
    hburst: str
    hready: str
    hresp: str


class Transfer(NamedTuple):
    port: str
    kind: str          # "read" | "write"
    addr: int
    size: int          # bytes
    data: int
    wait_cycles: int
    response: str      # "okay" | "error"


class Violation(NamedTuple):
    cycle: int
    port: str
    rule: str
    message: str


def classify_sample(s: BusSample) -> Classification:
    """Symbolic labels for every signal; UnknownEncoding for reserved values."""
    try:
        return Classification(
            HTRANS_LABELS[s.htrans],
            HSIZE_LABELS[s.hsize],
            HWRITE_LABELS[s.hwrite],
            HBURST_LABELS[s.hburst],
            HREADY_LABELS[s.hready],
            HRESP_LABELS[s.hresp],
        )
    except KeyError:
        for field, table in (("htrans", HTRANS_LABELS), ("hsize", HSIZE_LABELS),
                             ("hwrite", HWRITE_LABELS), ("hburst", HBURST_LABELS),
                             ("hready", HREADY_LABELS), ("hresp", HRESP_LABELS)):
            if getattr(s, field) not in table:
                raise UnknownEncoding(
                    f"{field}={getattr(s, field):#05b} reserved in this system") from None
        raise


def size_bits(nbytes: int) -> int:
    return {1: HSIZE_BYTE, 2: HSIZE_HALF, 4: HSIZE_WORD}[nbytes]


class _StreamState:
    __slots__ = ("last_cycle", "dp", "held", "err_open")

    def __init__(self):
        self.last_cycle: int | None = None
        # data phase in flight: [addr, size_bytes, write, waits, wdata_seen]
        self.dp: list | None = None
        # address phase held over an extended data phase (V1 reference)
        self.held: tuple | None = None
        self.err_open = False


_AP_FIELDS = ("htrans", "haddr", "hsize", "hwrite", "hburst")


class BusMonitor:
    """Passive observer reconstructing transfers and flagging violations."""

    def __init__(self):
        self._streams = {p: _StreamState() for p in PORTS}

    def step(self, s: BusSample) -> tuple[list[Transfer], list[Violation]]:
        st = self._streams[s.port]
        if st.last_cycle is not None and s.cycle <= st.last_cycle:
            raise OutOfOrderSample(
                f"port {s.port}: cycle {s.cycle} after {st.last_cycle}")
        st.last_cycle = s.cycle

        transfers: list[Transfer] = []
        violations: list[Violation] = []

        def flag(rule: str, message: str) -> None:
            violations.append(Violation(s.cycle, s.port, rule, message))

        if s.htrans == HTRANS_BUSY:
            flag("V4", "BUSY presented during SINGLE burst")
        if s.htrans == HTRANS_SEQ:
            flag("V2", "SEQ transfer in a SINGLE-burst-only system")
        if s.hresp not in HRESP_LABELS:
            flag("V2", f"reserved hresp {s.hresp:#04b}")

        if s.htrans == HTRANS_NONSEQ or s.htrans == HTRANS_SEQ:
            if s.hsize not in HSIZE_LABELS:
                flag("V2", f"reserved hsize {s.hsize:#05b}")
            elif s.haddr % SIZE_BYTES[s.hsize]:
                flag("V3", f"address {s.haddr:#010x} unaligned for "
                           f"{HSIZE_LABELS[s.hsize]}")
            if s.hburst != HBURST_SINGLE:
                flag("V2", f"reserved hburst {s.hburst:#05b}")

        # V1: while the data phase extends, the pending address phase and
        # the write data must hold perfectly still
        if st.held is not None:
            current = tuple(getattr(s, f) for f in _AP_FIELDS)
            if current != st.held:
                changed = [f for f, a, b in zip(_AP_FIELDS, st.held, current) if a != b]
                flag("V1", f"{'/'.join(changed)} changed while hready low")
            st.held = None

        if st.dp is not None:
            dp = st.dp
            if dp[2]:  # write: hwdata must be stable across the data phase
                if dp[4] is not None and s.hwdata != dp[4]:
                    flag("V1", "hwdata changed while hready low")
                dp[4] = s.hwdata
            err = s.hresp == RESP_ERROR
            if err and s.hready and not st.err_open:
                flag("V5", "ERROR response not preceded by its wait cycle")
            if st.err_open and not err:
                flag("V5", "ERROR response not held for two cycles")
                st.err_open = False
            if err and not s.hready:
                st.err_open = True
            if s.hready:
                st.err_open = False
                data = (s.hwdata if dp[2] else s.hrdata) & ((1 << (dp[1] * 8)) - 1)
                transfers.append(Transfer(
                    s.port, "write" if dp[2] else "read", dp[0], dp[1], data,
                    dp[3], "error" if err else "okay"))
                st.dp = None
            else:
                dp[3] += 1

        if s.htrans == HTRANS_NONSEQ:
            if st.dp is None:
                size = SIZE_BYTES.get(s.hsize, 4)
                st.dp = [s.haddr, size, bool(s.hwrite), 0, None]
            else:
                st.held = tuple(getattr(s, f) for f in _AP_FIELDS)

        return transfers, violations


def monitor_step(mon: BusMonitor, s: BusSample):
    return mon.step(s)


# ----------------------------------------------------------- trace files

TRACE_HEADER = ["cycle", "port", "htrans", "hsize", "hwrite", "hburst",
                "haddr", "hwdata", "hrdata", "hready", "hresp"]

_WIDTHS = {"htrans": 2, "hsize": 3, "hwrite": 1, "hburst": 3,
           "haddr": 32, "hwdata": 32, "hrdata": 32, "hready": 1, "hresp": 2}


def format_trace_row(s: BusSample) -> list[str]:
    return [str(s.cycle), s.port, f"{s.htrans:x}", f"{s.hsize:x}",
            f"{s.hwrite:x}", f"{s.hburst:x}", f"{s.haddr:x}",
            f"{s.hwdata:x}", f"{s.hrdata:x}", f"{s.hready:x}", f"{s.hresp:x}"]


def write_trace(path: str, samples) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_HEADER)
        for s in samples:
            w.writerow(format_trace_row(s))


def read_trace(path: str) -> list[BusSample]:
    with open(path, newline="") as f:
        return parse_trace(f)


def parse_trace(f) -> list[BusSample]:
    if isinstance(f, str):
        f = io.StringIO(f)
    rows = csv.reader(f)
    header = next(rows, None)
    if header != TRACE_HEADER:
        raise TraceFormatError(1, f"bad header {header!r}")
    samples = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(TRACE_HEADER):
            raise TraceFormatError(lineno, f"expected {len(TRACE_HEADER)} fields")
        try:
            cycle = int(row[0], 10)
            port = row[1]
            vals = {name: int(text, 16)
                    for name, text in zip(TRACE_HEADER[2:], row[2:])}
        except ValueError:
            raise TraceFormatError(lineno, "non-numeric field") from None
        if port not in PORTS:
            raise TraceFormatError(lineno, f"port must be I or D, got {port!r}")
        for name, width in _WIDTHS.items():
            if vals[name] >= (1 << width):
                raise TraceFormatError(lineno, f"{name} exceeds {width} bits")
        samples.append(BusSample(cycle, port, vals["htrans"], vals["hsize"],
                                 vals["hwrite"], vals["hburst"], vals["haddr"],
                                 vals["hwdata"], vals["hrdata"], vals["hready"],
                                 vals["hresp"]))
    return samples


def replay_trace(samples) -> tuple[list[Transfer], list[Violation]]:
    """Run the monitor over a full sample list (e.g. a parsed trace file)."""
    mon = BusMonitor()
    transfers: list[Transfer] = []
    violations: list[Violation] = []
    for s in samples:
        t, v = mon.step(s)
        transfers.extend(t)
        violations.extend(v)
    return transfers, violations
