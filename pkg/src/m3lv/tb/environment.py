"""Environment: component instantiation, connection, cycle loop, report.

One campaign is one deterministic single-threaded event loop: clock the
DUT, step both memory ports, feed the passive monitor, mirror NVIC
directives into the reference model at the DUT's commit points, unpack
and compare every retirement, sample coverage, until the halt sentinel
retires or the cycle budget runs out.  Identical configuration produces
byte-identical reports and traces.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from ..arch import RetireEvent
from ..bus import (BusMonitor, BusSample, BusRequest, DCODE, HBURST_SINGLE,
                   HTRANS_IDLE, HTRANS_NONSEQ, ICODE, RESP_OKAY, TRACE_HEADER,
                   Transfer, Violation, format_trace_row, size_bits)
from ..dut import BOUNDARY, BugId, PipelinedCore, RETURNING
from ..errors import (ExpectedUnderflow, InconsistentEvent, M3lvError)
from ..memory import MemoryModel, Region, default_memory
from ..nvic import (ACTION_ENTER, ACTION_NONE, ACTION_RETURN, ACTION_TAIL,
                    Nvic, NvicDirective)
from ..refmodel import ReferenceModel
from ..util import Rng, get_logger
from . import directed as directed_mod
from .checker import ArchTransaction, check_unpack
from .coverage import CoverageModel, coverage_sample
from .driver import Layout, apply_irq_action, drive, load_irq_file
from .generator import GeneratorConfig, generate
from .scoreboard import Mismatch, Scoreboard, event_bins

log = get_logger("env")


@dataclass
class EnvironmentConfig:
    seed: int = 0
    count: int = 1000
    test: str = "random"                 # directed name or "random"
    bug: BugId = BugId.NONE
    wait_states: tuple[int, int] | None = None   # None: derived from seed
    cycle_budget: int | None = None
    trace_path: str | None = None
    irq_file: str | None = None
    irq_rate: float = 0.0
    branch_density: float | None = None
    stop_on_mismatch: bool = False
    generator: GeneratorConfig | None = None     # overrides count/rates

    def validate(self) -> None:
        if self.count < 1:
            raise M3lvError("instruction count must be >= 1")
        if self.cycle_budget is not None and self.cycle_budget < self.count:
            raise M3lvError("cycle budget must be >= instruction count "
                            "(a retirement needs at least one cycle)")


@dataclass
class CampaignResult:
    seed: int
    test: str
    bug: str
    wait_states: tuple[int, int]
    instructions: int = 0
    cycles: int = 0
    mismatches: list[Mismatch] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    inconsistents: list[tuple[int, str, tuple[str, ...]]] = field(default_factory=list)
    expected_underflows: int = 0
    coverage: CoverageModel = field(default_factory=CoverageModel)
    halted: bool = False
    budget_exceeded: bool = False

    @property
    def failure_count(self) -> int:
        return (len(self.mismatches) + len(self.violations)
                + len(self.inconsistents) + self.expected_underflows)

    @property
    def passed(self) -> bool:
        return self.failure_count == 0

    def merge(self, other: "CampaignResult") -> None:
        self.instructions += other.instructions
        self.cycles += other.cycles
        self.mismatches.extend(other.mismatches)
        self.violations.extend(other.violations)
        self.inconsistents.extend(other.inconsistents)
        self.expected_underflows += other.expected_underflows
        self.coverage.merge(other.coverage)
        self.halted = self.halted and other.halted
        self.budget_exceeded = self.budget_exceeded or other.budget_exceeded


def derive_wait_states(seed: int) -> tuple[int, int]:
    rng = Rng(seed).fork(3)
    return rng.below(4), rng.below(4)


def _clone_memory(mem: MemoryModel) -> MemoryModel:
    regions = []
    for r in mem.regions:
        c = Region(r.name, r.base, r.size, 0)
        c.data[:] = r.data
        regions.append(c)
    return MemoryModel(regions)


def _expand_directive(d: NvicDirective) -> list[tuple]:
    if d.action == ACTION_ENTER:
        return [("enter", d.exception)]
    if d.action == ACTION_RETURN:
        return [("return",)]
    if d.action == ACTION_TAIL:
        return [("tail_return",), ("tail_enter", d.exception)]
    return []


def _idle_sample(cycle: int, port: str) -> BusSample:
    return BusSample(cycle, port, HTRANS_IDLE, 0, 0, HBURST_SINGLE,
                     0, 0, 0, 1, RESP_OKAY)


def _build_sample(cycle: int, port: str, req: BusRequest | None,
                  rsp, inflight: BusRequest | None) -> BusSample:
    if req is not None:
        htrans, haddr = HTRANS_NONSEQ, req.addr
        hsize, hwrite = size_bits(req.size), int(req.write)
    else:
        htrans = HTRANS_IDLE
        haddr = hsize = hwrite = 0
    if rsp is not None:
        hready, hresp, hrdata = int(rsp.ready), rsp.resp, rsp.rdata
    else:
        hready, hresp, hrdata = 1, RESP_OKAY, 0
    hwdata = inflight.wdata if (inflight is not None and inflight.write) else 0
    return BusSample(cycle, port, htrans, hsize, hwrite, HBURST_SINGLE,
                     haddr, hwdata, hrdata, hready, hresp)


class Environment:
    """Build, connect, run, report: one campaign."""

    def __init__(self, cfg: EnvironmentConfig):
        cfg.validate()
        self.cfg = cfg
        self.result: CampaignResult | None = None
        self._build()
        self._connect()

    # ---------------------------------------------------------------- build

    def _build(self) -> None:
        cfg = self.cfg
        layout = Layout()
        handlers = None
        budget = cfg.cycle_budget

        if cfg.test == "random":
            gen_cfg = cfg.generator or GeneratorConfig(
                seed=cfg.seed, count=cfg.count, irq_rate=cfg.irq_rate)
            if cfg.branch_density is not None:
                gen_cfg.branch_density = cfg.branch_density
            items = generate(gen_cfg)
            ws = cfg.wait_states or derive_wait_states(cfg.seed)
        else:
            dtest = directed_mod.build_directed(cfg.test)
            items = directed_mod.items_for(dtest)
            handlers = dtest.handlers
            ws = cfg.wait_states or dtest.wait_states
            if budget is None:
                budget = dtest.cycle_budget

        self.wait_states = ws
        self.memory = default_memory(code_ws=ws[0], data_ws=ws[1])
        self.nvic = Nvic()
        drv = drive(items, self.memory, self.nvic, layout, handlers)
        self.schedule = dict(drv.schedule)
        if cfg.irq_file:
            for cycle, line, action in load_irq_file(cfg.irq_file):
                self.schedule.setdefault(cycle, []).append((line, action, 0))

        self.ref_memory = _clone_memory(self.memory)
        self.dut = PipelinedCore(self.memory, layout.vector_base, cfg.bug)
        self.ref = ReferenceModel(self.ref_memory, layout.vector_base)
        self.program_len = drv.program_len
        if budget is None:
            budget = max(2000, cfg.count * 40)
        self.budget = budget

    def _connect(self) -> None:
        self.monitor = BusMonitor()
        self.scoreboard = Scoreboard()
        self.coverage = CoverageModel()
        self.result = CampaignResult(self.cfg.seed, self.cfg.test,
                                     self.cfg.bug.value, self.wait_states)
        self._trace_rows: list[list[str]] | None = \
            [] if self.cfg.trace_path else None

    # ----------------------------------------------------------------- run

    def run(self) -> CampaignResult:
        cfg = self.cfg
        res = self.result
        dut, ref, mem, nvic = self.dut, self.ref, self.memory, self.nvic
        monitor, sb, cov = self.monitor, self.scoreboard, self.coverage
        schedule = self.schedule
        tracing = self._trace_rows is not None
        ref_directives: list[tuple] = []
        window: list[Transfer] = []
        stop = False

        while not dut.halted:
            cycle = dut.cycle
            if cycle >= self.budget:
                res.budget_exceeded = True
                break

            for line, action, _prio in schedule.get(cycle, ()):
                apply_irq_action(nvic, line, action)

            directive = None
            wants = dut.wants_directive()
            if wants is not None:
                d = nvic.decide(True, returning=wants == RETURNING)
                if d.action != ACTION_NONE:
                    directive = d

            i_inflight = mem.inflight(ICODE)
            d_inflight = mem.inflight(DCODE)
            i_rsp = mem.reply(ICODE)
            d_rsp = mem.reply(DCODE)
            i_req, d_req, retire = dut.clock(i_rsp, d_rsp, directive)
            if directive is not None:
                nvic.commit(directive)
                ref_directives.extend(_expand_directive(directive))
            mem.accept(ICODE, i_req)
            mem.accept(DCODE, d_req)

            for port, req, rsp, inflight in (
                    (ICODE, i_req, i_rsp, i_inflight),
                    (DCODE, d_req, d_rsp, d_inflight)):
                if req is None and rsp is None:
                    if tracing:
                        s = _idle_sample(cycle, port)
                        self._trace_rows.append(format_trace_row(s))
                        monitor.step(s)
                    continue
                s = _build_sample(cycle, port, req, rsp, inflight)
                if tracing:
                    self._trace_rows.append(format_trace_row(s))
                transfers, violations = monitor.step(s)
                window.extend(transfers)
                res.violations.extend(violations)

            if retire is not None:
                stop = self._handle_retire(retire, window, ref_directives)
                window.clear()
                if stop and cfg.stop_on_mismatch:
                    break

        res.instructions = dut.seq
        res.cycles = dut.cycle
        res.halted = dut.halted
        if self._trace_rows is not None:
            with open(cfg.trace_path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(TRACE_HEADER)
                w.writerows(self._trace_rows)
        return res

    def _handle_retire(self, retire: RetireEvent, window: list[Transfer],
                       ref_directives: list[tuple]) -> bool:
        """Mirror the reference model, unpack, compare, sample coverage.
        Returns True when this retirement produced a failure."""
        res = self.result
        dcode_window = [t for t in window if t.port == DCODE]
        failed = False

        expected = None
        if self.ref.halted:
            res.expected_underflows += 1
            failed = True
        else:
            directive = ref_directives.pop(0) if ref_directives else None
            expected = self.ref.step(directive)
            self.scoreboard.push(expected)

        try:
            txn = check_unpack(retire, dcode_window)
        except InconsistentEvent as exc:
            bins = event_bins(retire)
            res.inconsistents.append((exc.seq, exc.reason, bins))
            failed = True
            txn = ArchTransaction(retire, tuple(dcode_window))

        if expected is not None:
            try:
                mm = self.scoreboard.compare(txn)
            except ExpectedUnderflow:
                res.expected_underflows += 1
                mm = None
                failed = True
            if mm is not None:
                failed = True

        coverage_sample(self.coverage, txn, window)
        return failed


def run_environment(cfg: EnvironmentConfig) -> CampaignResult:
    env = Environment(cfg)
    result = env.run()
    result.mismatches = env.scoreboard.mismatches
    log.info("campaign seed=%d test=%s: %d instructions, %d cycles, "
             "%d failures", cfg.seed, cfg.test, result.instructions,
             result.cycles, result.failure_count)
    return result


# -------------------------------------------------------------- reporting

def summary_line(result: CampaignResult, feature_pct: float | None = None,
                 feature_fail: bool = False) -> str:
    bad = (result.failure_count > 0) or feature_fail
    return (f"result={'fail' if bad else 'pass'} "
            f"mismatches={len(result.mismatches)} "
            f"violations={len(result.violations)} "
            f"coverage={result.coverage.percent:.1f}")


def format_report(result: CampaignResult, feature_report=None,
                  runs: list[CampaignResult] | None = None) -> str:
    lines = ["== RESULT =="]
    feature_fail = feature_report is not None and feature_report.failed > 0
    lines.append(summary_line(result, feature_fail=feature_fail))
    lines.append(f"test={result.test} bug={result.bug} "
                 f"instructions={result.instructions} cycles={result.cycles}")
    lines.append(f"inconsistent={len(result.inconsistents)} "
                 f"expected_underflow={result.expected_underflows} "
                 f"halted={'yes' if result.halted else 'no'} "
                 f"budget_exceeded={'yes' if result.budget_exceeded else 'no'}")
    if runs is not None:
        lines.append(f"runs={len(runs)} "
                     f"seeds={','.join(str(r.seed) for r in runs)}")
    else:
        lines.append(f"seed={result.seed} "
                     f"wait_states={result.wait_states[0]},{result.wait_states[1]}")

    lines.append("")
    lines.append("== MISMATCHES ==")
    if result.mismatches:
        for mm in result.mismatches[:50]:
            lines.append(mm.describe())
        if len(result.mismatches) > 50:
            lines.append(f"... {len(result.mismatches) - 50} more")
    else:
        lines.append("(none)")

    lines.append("")
    lines.append("== VIOLATIONS ==")
    if result.violations:
        for v in result.violations[:50]:
            lines.append(f"cycle {v.cycle} port {v.port} {v.rule}: {v.message}")
        if len(result.violations) > 50:
            lines.append(f"... {len(result.violations) - 50} more")
    else:
        lines.append("(none)")
    if result.inconsistents:
        lines.append("")
        lines.append("== INCONSISTENT EVENTS ==")
        for seq, reason, _bins in result.inconsistents[:50]:
            lines.append(f"retire #{seq}: {reason}")

    lines.append("")
    lines.append("== COVERAGE ==")
    lines.extend(result.coverage.report_lines())

    lines.append("")
    lines.append("== FEATURES ==")
    if feature_report is None:
        lines.append("(no plan)")
    else:
        lines.extend(feature_report.lines())
    lines.append("")
    return "\n".join(lines)
