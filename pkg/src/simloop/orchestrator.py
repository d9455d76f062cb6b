"""The generate-simulate-report loop with best-so-far baseline tracking.

Each initiation is a fresh start: a specification prompt produces an initial
candidate, every candidate runs against the full test-case set, and if it is
not yet a gold (all-pass) candidate the rendered report feeds a correction
prompt that produces the next version.  Every evaluated candidate is compared
to the incumbent baseline on its passed count P; non-executable candidates
never take the baseline.  The run stops at the first gold candidate (when
``stop_on_gold``) or when the initiation budget is exhausted.

The whole run is recorded in a :class:`RunLedger`, persistable as a plain
directory with no timestamps, so identical configurations yield
byte-identical ledgers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import LedgerError, PromptError, SimloopError
from .host import CandidateRun, RuntimeConfig, TRANSPORT_INPROCESS, run_candidate
from .llm import (
    CompletionGateway,
    ModelConfig,
    PromptBundle,
    build_correction_prompt,
    build_specification_prompt,
    extract_code,
)
from .oracle import OracleConfig, TestCaseResult, evaluate
from .protocol import ExecutabilityStatus
from .report import TestReport, render_report
from .reference import prompt_text
from .scenarios import (
    MODE_ACC,
    MODE_CAEM,
    ScenarioSpec,
    build_test_case,
    catalog_for_mode,
    catalog_order,
)
from .sim import DEFAULT_DT, SimTrace, events_to_jsonl, trace_to_csv

ORIGIN_INITIAL = "initial"
ORIGIN_CORRECTION = "correction"

REGRESSION_IMPROVED = "improved"
REGRESSION_UNCHANGED = "unchanged"
REGRESSION_REGRESSED = "regressed"
REGRESSION_NON_EXECUTABLE = "non_executable"


@dataclass(frozen=True)
class Origin:
    kind: str  # ORIGIN_INITIAL | ORIGIN_CORRECTION
    initiation: int
    parent: str | None = None

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "initiation": self.initiation, "parent": self.parent}

    @staticmethod
    def from_json_dict(d: dict) -> "Origin":
        return Origin(kind=d["kind"], initiation=d["initiation"], parent=d.get("parent"))


@dataclass
class CandidateVersion:
    """One generated controller and everything measured about it."""

    id: str
    origin: Origin
    source: str | None
    prompt: str = ""
    reply: str = ""
    gateway_error: str | None = None
    statuses: dict[str, ExecutabilityStatus] = field(default_factory=dict)
    results: dict[str, TestCaseResult] = field(default_factory=dict)
    traces: dict[str, SimTrace] = field(default_factory=dict)
    report: TestReport | None = None
    P: int = 0
    regression: str | None = None

    @property
    def fully_executable(self) -> bool:
        return bool(self.statuses) and all(s.executable for s in self.statuses.values())

    def is_gold(self, total: int) -> bool:
        return self.fully_executable and self.P == total


@dataclass(frozen=True)
class BaselineState:
    current: CandidateVersion | None = None
    gold: bool = False

    @property
    def P(self) -> int:
        return self.current.P if self.current is not None else -1


@dataclass(frozen=True)
class PromotionRecord:
    candidate_id: str
    P: int
    gold: bool

    def to_json_dict(self) -> dict:
        return {"candidate_id": self.candidate_id, "P": self.P, "gold": self.gold}


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = MODE_CAEM
    test_cases: tuple[str, ...] = ()
    initiations_max: int = 20
    correction_depth: int = 1
    stop_on_gold: bool = True
    dt: float = DEFAULT_DT
    model: ModelConfig = field(default_factory=ModelConfig)
    context: str = ""
    task: str = ""
    transport: str | tuple[str, ...] = TRANSPORT_INPROCESS
    parallel_test_cases: int = 1
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def resolved(self) -> "PipelineConfig":
        """Fill defaulted fields and validate."""
        if self.initiations_max < 1:
            raise SimloopError("initiations_max must be >= 1")
        if self.correction_depth < 0:
            raise SimloopError("correction_depth must be >= 0")
        if self.mode not in (MODE_ACC, MODE_CAEM):
            raise SimloopError(f"unknown mode {self.mode!r}")
        cfg = self
        if not cfg.test_cases:
            cfg = replace(cfg, test_cases=catalog_for_mode(cfg.mode))
        else:
            cfg = replace(cfg, test_cases=catalog_order(cfg.test_cases))
        if not cfg.context:
            cfg = replace(cfg, context=prompt_text("context"))
        if not cfg.task:
            name = "caem_task" if cfg.mode == MODE_CAEM else "acc_task"
            cfg = replace(cfg, task=prompt_text(name))
        cfg.model.validate()
        return cfg

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "test_cases": list(self.test_cases),
            "initiations_max": self.initiations_max,
            "correction_depth": self.correction_depth,
            "stop_on_gold": self.stop_on_gold,
            "dt": self.dt,
            "model": self.model.to_json_dict(),
            "context": self.context,
            "task": self.task,
            "transport": (self.transport if isinstance(self.transport, str)
                          else list(self.transport)),
            "parallel_test_cases": self.parallel_test_cases,
            "oracle": self.oracle.to_json_dict(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "PipelineConfig":
        transport = d.get("transport", TRANSPORT_INPROCESS)
        if isinstance(transport, list):
            transport = tuple(transport)
        return PipelineConfig(
            mode=d.get("mode", MODE_CAEM),
            test_cases=tuple(d.get("test_cases", ())),
            initiations_max=d.get("initiations_max", 20),
            correction_depth=d.get("correction_depth", 1),
            stop_on_gold=d.get("stop_on_gold", True),
            dt=d.get("dt", DEFAULT_DT),
            model=ModelConfig.from_json_dict(d.get("model", {})),
            context=d.get("context", ""),
            task=d.get("task", ""),
            transport=transport,
            parallel_test_cases=d.get("parallel_test_cases", 1),
            oracle=OracleConfig.from_json_dict(d["oracle"]) if "oracle" in d
            else OracleConfig(),
        )


@dataclass
class RunLedger:
    """Complete record of one pipeline run."""

    config: PipelineConfig
    candidates: list[CandidateVersion] = field(default_factory=list)
    promotions: list[PromotionRecord] = field(default_factory=list)

    @property
    def total_test_cases(self) -> int:
        return len(self.config.test_cases)

    @property
    def final_baseline(self) -> str | None:
        return self.promotions[-1].candidate_id if self.promotions else None

    @property
    def gold_reached(self) -> bool:
        return bool(self.promotions) and self.promotions[-1].gold

    def candidate(self, candidate_id: str) -> CandidateVersion:
        for c in self.candidates:
            if c.id == candidate_id:
                return c
        raise LedgerError(f"no candidate {candidate_id!r} in the ledger")


# --------------------------------------------------------------------------
# Candidate evaluation
# --------------------------------------------------------------------------

def evaluate_candidate_source(source: str | None, specs: list[ScenarioSpec],
                              dt: float, runtime: RuntimeConfig,
                              oracle_cfg: OracleConfig, candidate_id: str,
                              parallel: int = 1) -> tuple[CandidateRun, dict, TestReport, int]:
    """Run one candidate over all test cases, score it, and render its report."""
    run = run_candidate(source, specs, dt, runtime, parallel=parallel)
    results: dict[str, TestCaseResult] = {}
    for spec in specs:
        trace = run.traces.get(spec.id)
        if trace is not None:
            results[spec.id] = evaluate(trace, spec, oracle_cfg)
    report = render_report(candidate_id, specs, results, run.statuses)
    passed = sum(1 for r in results.values() if r.passed)
    return run, results, report, passed


# --------------------------------------------------------------------------
# Baseline logic
# --------------------------------------------------------------------------

def compare_to_baseline(candidate: CandidateVersion,
                        baseline: BaselineState, total: int) -> BaselineState:
    """Promote the candidate iff it is fully executable and strictly better."""
    if not candidate.fully_executable:
        return baseline
    if baseline.current is None or candidate.P > baseline.P:
        return BaselineState(current=candidate, gold=candidate.P == total)
    return baseline


def classify_regression(parent: CandidateVersion,
                        child: CandidateVersion) -> str:
    """How a correction compares to the version it was meant to improve."""
    if child.origin.kind != ORIGIN_CORRECTION or child.origin.parent != parent.id:
        raise SimloopError(f"{child.id} is not a correction of {parent.id}")
    if not child.fully_executable:
        return REGRESSION_NON_EXECUTABLE
    if child.P > parent.P:
        return REGRESSION_IMPROVED
    if child.P < parent.P:
        return REGRESSION_REGRESSED
    return REGRESSION_UNCHANGED


# --------------------------------------------------------------------------
# The pipeline
# --------------------------------------------------------------------------

def run_pipeline(config: PipelineConfig,
                 gateway: CompletionGateway | None = None) -> RunLedger:
    """Run the full loop and return the in-memory ledger."""
    cfg = config.resolved()
    if gateway is None:
        gateway = CompletionGateway(cfg.model)
    specs = [build_test_case(tc) for tc in cfg.test_cases]
    runtime = RuntimeConfig(transport=cfg.transport)
    ledger = RunLedger(config=cfg)
    baseline = BaselineState()
    total = len(specs)
    next_id = 1

    def new_candidate(origin: Origin, bundle: PromptBundle | None) -> CandidateVersion:
        nonlocal next_id
        candidate = CandidateVersion(
            id=f"C{next_id}", origin=origin, source=None,
            prompt=bundle.rendered if bundle is not None else "")
        next_id += 1
        if bundle is not None:
            try:
                candidate.reply = gateway.request(bundle)
                candidate.source = extract_code(candidate.reply)
            except SimloopError as exc:
                candidate.gateway_error = f"{type(exc).__name__}: {exc}"
        run, results, report, passed = evaluate_candidate_source(
            candidate.source, specs, cfg.dt, runtime, cfg.oracle, candidate.id,
            parallel=cfg.parallel_test_cases)
        candidate.statuses = run.statuses
        candidate.traces = run.traces
        candidate.results = results
        candidate.report = report
        candidate.P = passed
        ledger.candidates.append(candidate)
        return candidate

    def consider(candidate: CandidateVersion) -> None:
        nonlocal baseline
        promoted = compare_to_baseline(candidate, baseline, total)
        if promoted is not baseline:
            baseline = promoted
            ledger.promotions.append(
                PromotionRecord(candidate.id, candidate.P, baseline.gold))

    for initiation in range(1, cfg.initiations_max + 1):
        bundle = build_specification_prompt(cfg.context, cfg.task)
        candidate = new_candidate(Origin(ORIGIN_INITIAL, initiation), bundle)
        consider(candidate)
        if baseline.gold and cfg.stop_on_gold:
            break

        parent = candidate
        stop = False
        for _depth in range(cfg.correction_depth):
            if parent.is_gold(total):
                break
            if parent.source is None or not parent.source.strip():
                break  # nothing to correct: the prompt needs a last version of the code
            try:
                bundle = build_correction_prompt(
                    cfg.context, [s.description for s in specs],
                    parent.source, parent.report.text, cfg.task)
            except PromptError:
                break
            child = new_candidate(
                Origin(ORIGIN_CORRECTION, initiation, parent.id), bundle)
            child.regression = classify_regression(parent, child)
            consider(child)
            if baseline.gold and cfg.stop_on_gold:
                stop = True
                break
            parent = child
        if stop:
            break

    return ledger


# --------------------------------------------------------------------------
# Ledger persistence
# --------------------------------------------------------------------------

def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def save_ledger(ledger: RunLedger, out_dir: str | Path) -> Path:
    """Persist a ledger as a directory tree; deterministic, timestamp-free."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    _dump_json(root / "config.json", ledger.config.to_json_dict())

    for candidate in ledger.candidates:
        cdir = root / "candidates" / candidate.id
        cdir.mkdir(parents=True, exist_ok=True)
        if candidate.source is not None:
            (cdir / "source.py").write_text(candidate.source)
        (cdir / "prompt.txt").write_text(candidate.prompt)
        (cdir / "reply.txt").write_text(candidate.reply)
        if candidate.report is not None:
            (cdir / "report.txt").write_text(candidate.report.text)
            report_payload = candidate.report.to_json_dict()
            report_payload["results"] = {
                tc: result.to_json_dict() for tc, result in candidate.results.items()}
            _dump_json(cdir / "report.json", report_payload)
        digests = {}
        if candidate.traces:
            tdir = cdir / "traces"
            tdir.mkdir(exist_ok=True)
            for tc_id, trace in sorted(candidate.traces.items()):
                csv_text = trace_to_csv(trace)
                (tdir / f"{tc_id}.csv").write_text(csv_text)
                (tdir / f"{tc_id}.events.jsonl").write_text(events_to_jsonl(trace))
                digests[tc_id] = hashlib.sha256(csv_text.encode()).hexdigest()
        _dump_json(cdir / "candidate.json", {
            "id": candidate.id,
            "origin": candidate.origin.to_json_dict(),
            "P": candidate.P,
            "fully_executable": candidate.fully_executable,
            "statuses": {tc: s.to_json_dict()
                         for tc, s in sorted(candidate.statuses.items())},
            "regression": candidate.regression,
            "gateway_error": candidate.gateway_error,
            "trace_digests": digests,
        })

    with (root / "baseline.jsonl").open("w") as handle:
        for record in ledger.promotions:
            handle.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")

    from .stats import compute_stats  # local import: stats depends on this module

    summary = {
        "total_test_cases": ledger.total_test_cases,
        "candidate_count": len(ledger.candidates),
        "final_baseline": ledger.final_baseline,
        "gold_reached": ledger.gold_reached,
    }
    if ledger.candidates:
        summary["stats"] = compute_stats(ledger).to_json_dict()
    _dump_json(root / "summary.json", summary)
    return root


def load_ledger(ledger_dir: str | Path) -> RunLedger:
    """Reload a persisted ledger (sources, statuses, reports; traces stay on disk)."""
    root = Path(ledger_dir)
    config_path = root / "config.json"
    if not config_path.is_file():
        raise LedgerError(f"{root} is not a run ledger (missing config.json)")
    config = PipelineConfig.from_json_dict(json.loads(config_path.read_text()))
    ledger = RunLedger(config=config)

    cand_root = root / "candidates"
    if cand_root.is_dir():
        for cdir in sorted(cand_root.iterdir(),
                           key=lambda p: int(p.name.lstrip("C") or 0)):
            meta = json.loads((cdir / "candidate.json").read_text())
            source_path = cdir / "source.py"
            candidate = CandidateVersion(
                id=meta["id"],
                origin=Origin.from_json_dict(meta["origin"]),
                source=source_path.read_text() if source_path.is_file() else None,
                prompt=(cdir / "prompt.txt").read_text() if (cdir / "prompt.txt").is_file() else "",
                reply=(cdir / "reply.txt").read_text() if (cdir / "reply.txt").is_file() else "",
                gateway_error=meta.get("gateway_error"),
                statuses={tc: ExecutabilityStatus.from_json_dict(s)
                          for tc, s in meta["statuses"].items()},
                P=meta["P"],
                regression=meta.get("regression"),
            )
            ledger.candidates.append(candidate)

    baseline_path = root / "baseline.jsonl"
    if baseline_path.is_file():
        for line in baseline_path.read_text().splitlines():
            if line.strip():
                d = json.loads(line)
                ledger.promotions.append(
                    PromotionRecord(d["candidate_id"], d["P"], d["gold"]))
    return ledger
