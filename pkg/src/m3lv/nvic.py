"""Nested vectored interrupt controller model.

External lines 0..n_lines-1 map to exception numbers 16..16+n_lines-1.
Lower priority value = more urgent; no sub-priority grouping.  The
active stack records nesting: each entry preempted the one below it, so
priority values are strictly decreasing bottom to top.

decide() is pure: it looks at pending/enabled/priority state and the
core's boundary/returning status and proposes a directive.  The host
calls commit() once the core accepts it, which is when pending bits
clear and the active stack moves.  Tail-chaining: when a return would
unstack into a context that an enabled pending exception preempts, the
directive is tail_chain instead, and the core skips the unstack/restack.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LineOutOfRange, M3lvError

EXTERNAL_BASE = 16

ACTION_NONE = "none"
ACTION_ENTER = "enter"
ACTION_TAIL = "tail_chain"
ACTION_RETURN = "return"


@dataclass(frozen=True, slots=True)
class NvicDirective:
    action: str
    exception: int = 0

    @property
    def line(self) -> int:
        return self.exception - EXTERNAL_BASE


NONE_DIRECTIVE = NvicDirective(ACTION_NONE)


class Nvic:
    def __init__(self, n_lines: int = 16):
        if n_lines < 1:
            raise M3lvError("NVIC needs at least one line")
        self.n_lines = n_lines
        self.enabled = [False] * n_lines
        self.pending = [False] * n_lines
        self.active = [False] * n_lines
        self.priority = [0] * n_lines
        self.active_stack: list[int] = []   # exception numbers, oldest first

    def _check(self, line: int) -> None:
        if not 0 <= line < self.n_lines:
            raise LineOutOfRange(f"line {line} outside 0..{self.n_lines - 1}")

    # --------------------------------------------------- register surface

    def set_pending(self, line: int) -> None:
        self._check(line)
        self.pending[line] = True

    def clear_pending(self, line: int) -> None:
        self._check(line)
        self.pending[line] = False

    def set_enabled(self, line: int, on: bool) -> None:
        self._check(line)
        self.enabled[line] = bool(on)

    def set_priority(self, line: int, prio: int) -> None:
        self._check(line)
        if not 0 <= prio <= 255:
            raise M3lvError(f"priority {prio} outside 0..255")
        self.priority[line] = prio

    # ------------------------------------------------------------ queries

    def highest_pending(self) -> tuple[int, int] | None:
        """Enabled pending line with the lowest priority value; ties go to
        the lowest line number.  None when nothing is pending."""
        best = None
        for line in range(self.n_lines):
            if self.pending[line] and self.enabled[line]:
                p = self.priority[line]
                if best is None or p < best[1]:
                    best = (line, p)
        return best

    def current_priority(self) -> int | None:
        """Priority value of the executing context; None at base level."""
        if not self.active_stack:
            return None
        return self.priority[self.active_stack[-1] - EXTERNAL_BASE]

    # ---------------------------------------------------------- decisions

    def decide(self, at_retire_boundary: bool,
               returning: bool = False) -> NvicDirective:
        """Directive for this cycle; pure (no state change until commit)."""
        if returning:
            if not self.active_stack:
                raise M3lvError("return directive requested at base level")
            restored = None
            if len(self.active_stack) >= 2:
                restored = self.priority[self.active_stack[-2] - EXTERNAL_BASE]
            hp = self.highest_pending()
            if hp is not None and (restored is None or hp[1] < restored):
                return NvicDirective(ACTION_TAIL, EXTERNAL_BASE + hp[0])
            return NvicDirective(ACTION_RETURN, self.active_stack[-1])
        if not at_retire_boundary:
            return NONE_DIRECTIVE
        hp = self.highest_pending()
        if hp is None:
            return NONE_DIRECTIVE
        cur = self.current_priority()
        if cur is None or hp[1] < cur:
            return NvicDirective(ACTION_ENTER, EXTERNAL_BASE + hp[0])
        return NONE_DIRECTIVE

    def commit(self, directive: NvicDirective) -> None:
        """Apply a directive the core accepted this cycle."""
        act = directive.action
        if act == ACTION_NONE:
            return
        if act == ACTION_ENTER:
            line = directive.line
            self._check(line)
            self.pending[line] = False
            self.active[line] = True
            self.active_stack.append(directive.exception)
        elif act == ACTION_RETURN:
            if not self.active_stack:
                raise M3lvError("return with empty active stack")
            top = self.active_stack.pop()
            self.active[top - EXTERNAL_BASE] = False
        elif act == ACTION_TAIL:
            if not self.active_stack:
                raise M3lvError("tail-chain with empty active stack")
            top = self.active_stack.pop()
            self.active[top - EXTERNAL_BASE] = False
            line = directive.line
            self._check(line)
            self.pending[line] = False
            self.active[line] = True
            self.active_stack.append(directive.exception)
        else:
            raise M3lvError(f"unknown directive action {act!r}")
