"""Aggregate statistics over a run ledger.

The improvement metric normalizes a correction's passed-count change by the
number of test cases, so "+9.2%" means the average correction recovered 9.2%
of the whole test suite; the raw passed-count deltas are reported alongside.
Only corrections whose parent and child both executed on every test case
enter the improvement means.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import StatsError
from .orchestrator import ORIGIN_CORRECTION, ORIGIN_INITIAL, RunLedger
from .protocol import STATUS_NO_CODE, STATUS_SYNTAX_ERROR


@dataclass(frozen=True)
class RunStats:
    total_candidates: int
    compilable_count: int
    successful_initial: int
    successful_corrected: int
    success_rate_initial: float
    success_rate_correction: float
    mean_delta_p_all_corrections: float    # fraction of the test-case total
    mean_delta_p_improving_only: float     # fraction of the test-case total
    mean_raw_delta_p_all_corrections: float
    mean_raw_delta_p_improving_only: float
    corrections_counted: int
    improving_corrections: int

    def to_json_dict(self) -> dict:
        return {
            "total_candidates": self.total_candidates,
            "compilable_count": self.compilable_count,
            "successful_initial": self.successful_initial,
            "successful_corrected": self.successful_corrected,
            "success_rate_initial": self.success_rate_initial,
            "success_rate_correction": self.success_rate_correction,
            "mean_delta_p_all_corrections": self.mean_delta_p_all_corrections,
            "mean_delta_p_improving_only": self.mean_delta_p_improving_only,
            "mean_raw_delta_p_all_corrections": self.mean_raw_delta_p_all_corrections,
            "mean_raw_delta_p_improving_only": self.mean_raw_delta_p_improving_only,
            "corrections_counted": self.corrections_counted,
            "improving_corrections": self.improving_corrections,
        }


def _compilable(candidate) -> bool:
    if candidate.source is None:
        return False
    return all(s.kind not in (STATUS_NO_CODE, STATUS_SYNTAX_ERROR)
               for s in candidate.statuses.values())


def compute_stats(ledger: RunLedger) -> RunStats:
    """Success rates and correction-improvement means for one run."""
    if not ledger.candidates:
        raise StatsError("ledger holds no candidates")
    total_tcs = ledger.total_test_cases
    if total_tcs == 0:
        raise StatsError("ledger has no test cases configured")
    by_id = {c.id: c for c in ledger.candidates}

    initials = [c for c in ledger.candidates if c.origin.kind == ORIGIN_INITIAL]
    corrections = [c for c in ledger.candidates if c.origin.kind == ORIGIN_CORRECTION]

    gold_initials = [c for c in initials if c.is_gold(total_tcs)]
    gold_corrections = [c for c in corrections if c.is_gold(total_tcs)]

    on_executable_parents = [
        c for c in corrections if by_id[c.origin.parent].fully_executable]

    deltas = []
    for child in corrections:
        parent = by_id[child.origin.parent]
        if parent.fully_executable and child.fully_executable:
            deltas.append(child.P - parent.P)
    improving = [d for d in deltas if d > 0]

    def mean(values) -> float:
        return sum(values) / len(values) if values else 0.0

    return RunStats(
        total_candidates=len(ledger.candidates),
        compilable_count=sum(1 for c in ledger.candidates if _compilable(c)),
        successful_initial=len(gold_initials),
        successful_corrected=len(gold_corrections),
        success_rate_initial=(len(gold_initials) / len(initials)) if initials else 0.0,
        success_rate_correction=(len(gold_corrections) / len(on_executable_parents))
        if on_executable_parents else 0.0,
        mean_delta_p_all_corrections=mean([d / total_tcs for d in deltas]),
        mean_delta_p_improving_only=mean([d / total_tcs for d in improving]),
        mean_raw_delta_p_all_corrections=mean(deltas),
        mean_raw_delta_p_improving_only=mean(improving),
        corrections_counted=len(deltas),
        improving_corrections=len(improving),
    )
