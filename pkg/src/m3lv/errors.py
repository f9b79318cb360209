"""Exception types shared across the framework.

Collected in one module so that the CLI can map every internally raised
configuration/usage error onto exit code 2 with a single except clause,
and so the bus/checker layers can catch memory faults without importing
each other.
"""


class M3lvError(Exception):
    """Base class for every error raised by this package."""


class UndefinedError(M3lvError):
    """Halfword does not encode an instruction of the supported subset."""

    def __init__(self, halfword: int, reason: str = "outside supported subset"):
        super().__init__(f"undefined encoding 0x{halfword:04x}: {reason}")
        self.halfword = halfword


class RangeError(M3lvError):
    """Instruction operand exceeds its encoding field width."""


class MemoryFault(M3lvError):
    """Access outside the configured memory map."""

    def __init__(self, addr: int, size: int, write: bool):
        kind = "write" if write else "read"
        super().__init__(f"memory fault: {kind} of {size} byte(s) at 0x{addr:08x}")
        self.addr = addr
        self.size = size
        self.write = write


class UnknownEncoding(M3lvError):
    """Bus signal value outside this system's documented encodings."""


class OutOfOrderSample(M3lvError):
    """Bus samples must arrive in strictly increasing cycle order per port."""


class TraceFormatError(M3lvError):
    """Trace CSV row malformed or field out of its declared bit width."""

    def __init__(self, line: int, message: str):
        super().__init__(f"trace line {line}: {message}")
        self.line = line


class LineOutOfRange(M3lvError):
    """Interrupt line index >= configured number of lines."""


class InfeasibleConstraint(M3lvError):
    """Generator configuration admits no legal stimulus."""


class ImageOverlap(M3lvError):
    """Assembled program image does not fit the code region layout."""


class InconsistentEvent(M3lvError):
    """Retired instruction disagrees with its observed bus transfers."""

    def __init__(self, seq: int, reason: str):
        super().__init__(f"retire #{seq}: {reason}")
        self.seq = seq
        self.reason = reason


class ExpectedUnderflow(M3lvError):
    """DUT retired an instruction the reference model never produced."""


class CycleBudgetExceeded(M3lvError):
    """Program did not reach the halt sentinel within the cycle budget."""


class ParseError(M3lvError):
    """Verification-plan text rejected, with the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line

    def __eq__(self, other):
        return isinstance(other, ParseError) and other.args == self.args

    def __hash__(self):
        return hash(self.args)


class UnknownCoverageRef(M3lvError):
    """Plan references a coverage bin absent from the coverage model."""
