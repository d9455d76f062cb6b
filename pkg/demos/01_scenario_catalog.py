#!/usr/bin/env python3
"""Tour of the built-in scenario catalog.

Builds every test case, shows the geometry that makes the cut-in scenarios
hard (a 0.4 s headway at the moment the intruder starts braking), and prints
one scenario in the portable file format.
"""

from simloop.scenarios import (
    ALL_TEST_CASES,
    CUT_IN_END_S,
    build_test_case,
    serialize_scenario,
    solve_initial_offset,
)

print("=== Catalog summary ===")
for tc in ALL_TEST_CASES:
    spec = build_test_case(tc)
    agents = ", ".join(f"{a.name}@{a.initial_offset:+.1f}m" for a in spec.agents) or "none"
    expect = ("lane change required" if spec.expected_outcome.lane_change_required
              else "lane keeping required" if spec.expected_outcome.lane_change_forbidden
              else "no expectation")
    print(f"{tc:5s} mode={spec.mode:4s} ego {spec.ego_speed * 3.6:5.0f} km/h "
          f"in lane {spec.ego_lane} of {spec.road.lane_count}; agents: {agents}; {expect}")

print()
print("=== The 0.4 s headway construction ===")
print("The intruder holds a small speed surplus until its cut-in completes at "
      f"t = {CUT_IN_END_S:.0f} s; its starting gap is solved so the headway is 0.4 s "
      "exactly when it starts braking:")
for kmh in (120.0, 80.0, 40.0):
    ego = kmh / 3.6
    faster = ego * 1.05
    offset = solve_initial_offset(ego, faster, CUT_IN_END_S, 0.4)
    print(f"  ego {kmh:5.0f} km/h: overtaker {faster:6.2f} m/s, initial gap {offset:5.2f} m "
          f"-> gap at onset {offset + (faster - ego) * CUT_IN_END_S:5.2f} m "
          f"= 0.4 x {ego:.2f} m/s")

print()
print("=== TC4 in the portable scenario format ===")
print(serialize_scenario(build_test_case("TC4")))
