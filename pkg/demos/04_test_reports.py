#!/usr/bin/env python3
"""From numeric traces to the natural-language test report.

Evaluates the passive reference controller on all seven lane-change test
cases and prints the exact report text that feeds correction prompts.
"""

from simloop.host import FunctionController
from simloop.oracle import evaluate
from simloop.protocol import executable_status
from simloop.reference import controller_source, load_controller_function
from simloop.report import render_report
from simloop.scenarios import CAEM_TEST_CASES, build_test_case
from simloop.sim import run_simulation

specs = [build_test_case(tc) for tc in CAEM_TEST_CASES]
source = controller_source("naive")

results, statuses = {}, {}
for spec in specs:
    fn = load_controller_function(source)
    trace = run_simulation(spec, FunctionController(fn, spec.id))
    results[spec.id] = evaluate(trace, spec)
    statuses[spec.id] = executable_status(spec.id)

report = render_report("demo-candidate", specs, results, statuses)
print(report.text)
