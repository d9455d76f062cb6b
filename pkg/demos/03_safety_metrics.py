#!/usr/bin/env python3
"""Headway and time-to-collision over a cut-in scenario.

Tabulates both metrics for the passive ego on TC1: the headway snaps to 0.4 s
when the intruder settles in front, and TTC appears once the intruder is
slower than the ego, then shrinks to zero at impact.
"""

from simloop.host import FunctionController
from simloop.oracle import compute_headway, compute_ttc
from simloop.reference import controller_source, load_controller_function
from simloop.scenarios import build_test_case
from simloop.sim import run_simulation

spec = build_test_case("TC1")
fn = load_controller_function(controller_source("naive"))
trace = run_simulation(spec, FunctionController(fn, spec.id))
width = spec.road.lane_width

print(f"{'t [s]':>6s} {'headway [s]':>12s} {'TTC [s]':>9s}")
for frame in trace.frames:
    if abs(frame.time * 2 - round(frame.time * 2)) > 1e-9:  # every 0.5 s
        continue
    headway = compute_headway(frame, width)
    ttc = compute_ttc(frame, width)
    print(f"{frame.time:6.1f} "
          f"{'-' if headway is None else f'{headway:12.3f}'.strip():>12s} "
          f"{'-' if ttc is None else f'{ttc:9.3f}'.strip():>9s}")

print()
print("The collision happens where both metrics vanish; an evasive manoeuvre "
      "must be triggered while TTC is still positive.")
