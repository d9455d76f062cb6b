"""Simulation engine: integration, lane changes, collision detection, events."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simloop.errors import ControllerFault, SimloopError
from simloop.host import FunctionController
from simloop.protocol import ControlAction
from simloop.scenarios import (
    AgentScript,
    Decelerate,
    Hold,
    MatchSpeed,
    RoadSpec,
    build_test_case,
    with_duration,
)
from simloop.sim import (
    EVENT_COLLISION,
    EVENT_LANE_CHANGE,
    LANE_CHANGE_DURATION_S,
    SimEvent,
    TraceFrame,
    VehicleState,
    apply_lane_change,
    detect_collision,
    events_to_jsonl,
    load_trace,
    run_simulation,
    step_agent,
    trace_to_csv,
)
from simloop.reference import controller_source

from conftest import run_source

ROAD = RoadSpec(3, 3.5, 1000.0)


class TestStepAgent:
    def test_hold_advances_by_v_dt(self):
        script = AgentScript("A", 0, 10.0, 33.33, (Hold(10.0),))
        state = VehicleState("A", 100.0, 1.75, 33.33)
        after = step_agent(state, script, 0.0, state, ROAD, 0.05)
        assert after.s == pytest.approx(100.0 + 33.33 * 0.05)
        assert after.speed == 33.33

    def test_decelerate_floors_at_zero(self):
        script = AgentScript("A", 0, 10.0, 2.0, (Decelerate(6.0, 0.0),))
        state = VehicleState("A", 100.0, 1.75, 2.0)
        after = step_agent(state, script, 0.0, state, ROAD, 0.5)
        assert after.speed == 0.0

    def test_match_speed_tracks_ego(self):
        script = AgentScript("A", 0, 10.0, 35.0, (MatchSpeed(),))
        ego = VehicleState("Ego", 90.0, 5.25, 30.0)
        state = VehicleState("A", 100.0, 1.75, 35.0)
        after = step_agent(state, script, 0.0, ego, ROAD, 0.05)
        assert after.speed == 30.0

    def test_oncoming_agent_moves_backward(self):
        script = AgentScript("A", -1, 100.0, 20.0, (Hold(10.0),), heading=-1)
        state = VehicleState("A", 200.0, -1.75, 20.0, heading=-1)
        after = step_agent(state, script, 0.0, state, ROAD, 0.1)
        assert after.s == pytest.approx(198.0)


class TestLaneChange:
    def test_left_target_is_adjacent_center(self):
        ego = VehicleState("Ego", 100.0, 5.25, 30.0)
        plan = apply_lane_change(ego, -1, ROAD)
        assert plan.target_lat == pytest.approx(0.5 * 3.5)

    def test_left_from_lane_zero_targets_off_road(self):
        ego = VehicleState("Ego", 100.0, 1.75, 30.0)
        plan = apply_lane_change(ego, -1, ROAD)
        assert plan.target_lat == pytest.approx(-0.5 * 3.5)

    def test_midpoint_displacement_is_half(self):
        ego = VehicleState("Ego", 100.0, 5.25, 30.0)
        plan = apply_lane_change(ego, -1, ROAD, time=0.0)
        mid = plan.lat_at(LANE_CHANGE_DURATION_S / 2.0)
        assert mid - 5.25 == pytest.approx((plan.target_lat - 5.25) / 2.0, rel=1e-9)

    def test_command_during_change_is_ignored(self):
        # Issue -1 every tick: exactly one manoeuvre completes per 2 s window.
        spec = with_duration(build_test_case("TC6"), 3.0)
        trace = run_source("def controller(obs):\n    return 0.0, -1\n", spec)
        completions = [e for e in trace.events_of_kind(EVENT_LANE_CHANGE)]
        assert [e.time for e in completions[:1]] == [pytest.approx(2.0)]
        # second manoeuvre starts right after the first completes
        assert len(completions) == 1 or completions[1].time == pytest.approx(4.0)


class TestDetectCollision:
    def _frame(self, pairs):
        return TraceFrame(0.0, tuple(pairs))

    def test_disjoint_same_lane(self):
        a = VehicleState("Ego", 100.0, 1.75, 30.0)
        b = VehicleState("B", 115.0, 1.75, 30.0)  # 10 m bumper gap
        assert detect_collision(self._frame([a, b])) == []

    def test_zero_gap_touches(self):
        a = VehicleState("Ego", 100.0, 1.75, 30.0)
        b = VehicleState("B", 105.0, 1.75, 30.0)
        assert detect_collision(self._frame([a, b])) == [("Ego", "B")]

    def test_lateral_offset_two_meters_touches(self):
        a = VehicleState("Ego", 100.0, 1.75, 30.0)
        b = VehicleState("B", 100.0, 3.75, 30.0)
        assert detect_collision(self._frame([a, b])) == [("Ego", "B")]

    def test_brute_force_grid_agreement(self):
        """Sampled-point overlap oracle agrees across a grid of offsets."""
        # A spans s in [-5, 0] and lat in [-1, 1]; B spans [ds - 5, ds] and
        # [dlat - 1, dlat + 1].  Grid-sample A's box for points inside B.
        def brute(ds, dlat):
            steps = 81
            for i in range(steps):
                px = -5.0 + 5.0 * i / (steps - 1)
                if not (ds - 5.0 <= px <= ds):
                    continue
                for j in range(steps):
                    py = -1.0 + 2.0 * j / (steps - 1)
                    if dlat - 1.0 <= py <= dlat + 1.0:
                        return True
            return False

        for ds in (0.0, 2.5, 4.999, 5.0, 6.0, 10.0):
            for dlat in (0.0, 1.5, 1.999, 2.0, 2.5):
                a = VehicleState("Ego", 0.0, 0.0, 10.0)
                b = VehicleState("B", ds, dlat, 10.0)
                got = bool(detect_collision(self._frame([a, b])))
                assert got == brute(ds, dlat), (ds, dlat)

    @given(sa=st.floats(-20, 20), sb=st.floats(-20, 20),
           la=st.floats(-5, 12), lb=st.floats(-5, 12))
    @settings(max_examples=120, deadline=None)
    def test_symmetry(self, sa, sb, la, lb):
        a = VehicleState("A", sa, la, 10.0)
        b = VehicleState("B", sb, lb, 10.0)
        ab = detect_collision(TraceFrame(0.0, (a, b)))
        ba = detect_collision(TraceFrame(0.0, (b, a)))
        assert bool(ab) == bool(ba)
        assert {frozenset(p) for p in ab} == {frozenset(p) for p in ba}


class TestRunSimulation:
    def test_tc6_noop_constant_velocity(self):
        spec = build_test_case("TC6")
        trace = run_source(controller_source("naive"), spec)
        assert trace.events == ()
        expected = 50.0 + spec.ego_speed * spec.duration
        assert trace.frames[-1].ego.s == pytest.approx(expected, abs=1e-6)
        assert len(trace.frames) == math.ceil(spec.duration / trace.dt) + 1

    def test_tc1_noop_collision_event(self):
        spec = build_test_case("TC1")
        trace = run_source(controller_source("naive"), spec)
        collisions = trace.events_of_kind(EVENT_COLLISION)
        assert len(collisions) == 1
        event = collisions[0]
        assert (event.subject, event.object) == ("Ego", "OverTaker")
        assert event.ego_speed_at_event == pytest.approx(spec.ego_speed)
        # halts one tick after the collision
        assert trace.frames[-1].time == pytest.approx(event.time + trace.dt)

    def test_tc1_gold_changes_lane_without_collision(self):
        spec = build_test_case("TC1")
        trace = run_source(controller_source("gold"), spec)
        assert not trace.events_of_kind(EVENT_COLLISION)
        ego_changes = [e for e in trace.events_of_kind(EVENT_LANE_CHANGE)
                       if e.subject == "Ego"]
        assert len(ego_changes) == 1

    def test_caem_speed_is_constant(self):
        spec = build_test_case("TC1")
        source = "def controller(obs):\n    return 8.0, 0\n"  # max accel, ignored
        trace = run_source(source, spec)
        speeds = {frame.ego.speed for frame in trace.frames}
        assert speeds == {spec.ego_speed}

    def test_acc_accel_is_applied(self):
        spec = build_test_case("ACC3")
        source = "def controller(obs):\n    return 1.0, 0\n"
        trace = run_source(source, spec)
        ego0, ego1 = trace.frames[0].ego, trace.frames[1].ego
        assert ego1.speed == pytest.approx(ego0.speed + 1.0 * trace.dt)

    def test_hold_integration_has_no_drift(self):
        spec = with_duration(build_test_case("TC6"), 50.0)  # 1000 ticks
        trace = run_source(controller_source("naive"), spec)
        expected = 50.0 + spec.ego_speed * 50.0
        assert abs(trace.frames[-1].ego.s - expected) <= 1e-6

    def test_determinism_byte_identical(self):
        spec = build_test_case("TC4")
        a = run_source(controller_source("gold"), spec)
        b = run_source(controller_source("gold"), spec)
        assert trace_to_csv(a) == trace_to_csv(b)
        assert events_to_jsonl(a) == events_to_jsonl(b)

    def test_events_align_with_frames(self):
        for tc in ("TC1", "TC4", "TC5"):
            spec = build_test_case(tc)
            trace = run_source(controller_source("eager"), spec)
            times = {frame.time for frame in trace.frames}
            for event in trace.events:
                assert event.time in times
            assert [e.time for e in trace.events] == sorted(
                e.time for e in trace.events)

    def test_dt_bounds(self):
        spec = build_test_case("TC6")
        controller = FunctionController(lambda obs: (0.0, 0))
        with pytest.raises(SimloopError):
            run_simulation(spec, controller, dt=0.0)
        with pytest.raises(SimloopError):
            run_simulation(spec, controller, dt=0.5)

    def test_malformed_action_aborts_with_tick(self):
        spec = build_test_case("TC6")
        source = "def controller(obs):\n    return {'accel': 'fast'}\n"
        from simloop.host import spawn

        handle = spawn(source, spec)
        with pytest.raises(ControllerFault) as exc:
            run_simulation(spec, handle, 0.05)
        assert exc.value.status.kind == "runtime_failure"
        assert exc.value.status.tc_id == "TC6"
        assert exc.value.status.tick == 0


class TestTracePersistence:
    def test_csv_round_trip(self):
        spec = build_test_case("TC1")
        trace = run_source(controller_source("naive"), spec)
        loaded = load_trace(trace_to_csv(trace), events_to_jsonl(trace), spec)
        assert loaded.frames == trace.frames
        assert loaded.events == trace.events
        assert loaded.dt == pytest.approx(trace.dt)

    def test_corrupt_row_reports_row_number(self):
        spec = build_test_case("TC6")
        trace = run_source(controller_source("naive"), spec)
        lines = trace_to_csv(trace).splitlines()
        lines[3] = "garbage"
        with pytest.raises(SimloopError) as exc:
            load_trace("\n".join(lines), "", spec)
        assert "row 4" in str(exc.value)

    def test_event_json_round_trip(self):
        event = SimEvent(EVENT_COLLISION, 8.45, "Ego", "OverTaker", 33.33)
        assert SimEvent.from_json_dict(event.to_json_dict()) == event
