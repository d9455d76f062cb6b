#!/usr/bin/env python3
"""The full loop end to end, driven by a mock reply playlist.

Scripted replies stand in for a live model: a weak first candidate, a partial
improvement, and finally the evasive reference controller.  The run shows the
baseline promotions, the correction classification, and the persisted ledger.
"""

import tempfile
from pathlib import Path

from simloop.llm import ModelConfig
from simloop.orchestrator import PipelineConfig, run_pipeline, save_ledger
from simloop.reference import controller_source
from simloop.stats import compute_stats

workdir = Path(tempfile.mkdtemp(prefix="simloop_demo_"))

# Build the playlist: initiation 1 produces a do-nothing controller and a
# (still weak) correction; initiation 2 starts weak and its correction is the
# full evasive controller, which ends the run as the gold baseline.
playlist = workdir / "playlist"
playlist.mkdir()
naive = controller_source("naive")
gold = controller_source("gold")
replies = [
    f"A first attempt:\n\n```python\n{naive}```\n",
    f"Hardening the previous version:\n\n```python\n{naive}```\n",
    f"A fresh start:\n\n```python\n{naive}```\n",
    f"Fixing the reported collisions:\n\n```python\n{gold}```\n",
]
for i, reply in enumerate(replies, start=1):
    (playlist / f"{i:03d}.txt").write_text(reply)

config = PipelineConfig(
    mode="CAEM",
    initiations_max=5,
    correction_depth=1,
    model=ModelConfig(mock_playlist=str(playlist)),
)

ledger = run_pipeline(config)

print("=== Candidates ===")
for candidate in ledger.candidates:
    origin = (f"initiation {candidate.origin.initiation}"
              if candidate.origin.kind == "initial"
              else f"correction of {candidate.origin.parent}")
    note = f", {candidate.regression}" if candidate.regression else ""
    print(f"  {candidate.id}: {origin}, passed {candidate.P} of "
          f"{ledger.total_test_cases}{note}")

print()
print("=== Baseline trajectory ===")
for record in ledger.promotions:
    flag = " (gold, loop stops)" if record.gold else ""
    print(f"  {record.candidate_id} promoted with P={record.P}{flag}")

stats = compute_stats(ledger)
print()
print("=== Statistics ===")
print(f"  initial success rate:    {stats.success_rate_initial:.0%}")
print(f"  correction success rate: {stats.success_rate_correction:.0%}")
print(f"  mean improvement:        {stats.mean_delta_p_all_corrections:.1%} of the suite")

out = save_ledger(ledger, workdir / "ledger")
print()
print(f"Ledger persisted under {out}")
print("Inspect it with:  simloop stats --ledger", out)
