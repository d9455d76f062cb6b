"""Safety oracle: SR checks, metrics, intended-manoeuvre logic."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simloop.errors import EvaluationError
from simloop.oracle import (
    EXPECTED_MANOEUVRE_MISSING,
    OracleConfig,
    SR1,
    SR2,
    SR3,
    compute_headway,
    compute_ttc,
    detect_unintended_lane_change,
    evaluate,
)
from simloop.scenarios import RoadSpec, build_test_case, with_duration
from simloop.sim import (
    EVENT_COLLISION,
    SimEvent,
    SimTrace,
    TraceFrame,
    VehicleState,
)
from simloop.reference import controller_source

from conftest import evaluate_source

LANE_W = 3.5


def frame_with_lead(gap: float, ego_speed: float, lead_speed: float,
                    same_lane: bool = True) -> TraceFrame:
    ego = VehicleState("Ego", 100.0, 5.25, ego_speed)
    lat = 5.25 if same_lane else 1.75
    lead = VehicleState("L", 100.0 + gap + 5.0, lat, lead_speed)
    return TraceFrame(0.0, (ego, lead))


class TestComputeHeadway:
    def test_designed_gap(self):
        frame = frame_with_lead(13.33, 33.33, 35.0)
        assert compute_headway(frame, LANE_W) == pytest.approx(0.400, abs=5e-4)

    def test_no_lead(self):
        ego = VehicleState("Ego", 100.0, 5.25, 30.0)
        assert compute_headway(TraceFrame(0.0, (ego,)), LANE_W) is None

    def test_zero_speed(self):
        frame = frame_with_lead(10.0, 0.0, 5.0)
        assert compute_headway(frame, LANE_W) is None

    def test_other_lane_ignored(self):
        frame = frame_with_lead(10.0, 30.0, 5.0, same_lane=False)
        assert compute_headway(frame, LANE_W) is None


class TestComputeTtc:
    def test_simple_ratio(self):
        frame = frame_with_lead(20.0, 15.0, 10.0)
        assert compute_ttc(frame, LANE_W) == pytest.approx(4.0)

    def test_opening_gap_is_absent(self):
        frame = frame_with_lead(20.0, 10.0, 15.0)
        assert compute_ttc(frame, LANE_W) is None

    def test_matches_trace_recomputation(self):
        """After braking starts, TTC matches an independent per-frame recompute."""
        spec = build_test_case("TC1")
        _result, trace = evaluate_source(controller_source("naive"), spec)

        def recompute(frame):
            ego = frame.ego
            lead = frame.vehicle("OverTaker")
            gap = (lead.s - lead.length) - ego.s
            closing = ego.speed - lead.speed
            return gap / closing if closing > 0 else None

        # one tick after deceleration onset the lead is still faster: no TTC
        early = next(f for f in trace.frames if abs(f.time - 6.05) < 1e-9)
        assert recompute(early) is None
        assert compute_ttc(early, spec.road.lane_width) is None
        # once the lead has slowed below the ego speed, the values agree
        late = next(f for f in trace.frames if abs(f.time - 7.0) < 1e-9)
        expected = recompute(late)
        assert expected is not None and expected > 0
        assert compute_ttc(late, spec.road.lane_width) == pytest.approx(expected)

    @given(gap=st.floats(0.1, 100.0), ego=st.floats(0.0, 40.0),
           lead=st.floats(0.0, 40.0))
    @settings(max_examples=80, deadline=None)
    def test_absent_or_positive(self, gap, ego, lead):
        frame = frame_with_lead(gap, ego, lead)
        for value in (compute_headway(frame, LANE_W), compute_ttc(frame, LANE_W)):
            assert value is None or value > 0


class TestEvaluate:
    def test_tc1_noop_fails_sr1(self):
        result, _ = evaluate_source(controller_source("naive"), build_test_case("TC1"))
        assert not result.passed
        assert [v.requirement for v in result.violations] == [SR1]
        assert result.violations[0].event.object == "OverTaker"

    def test_tc6_noop_passes(self):
        result, _ = evaluate_source(controller_source("naive"), build_test_case("TC6"))
        assert result.passed
        assert result.violations == ()

    def test_tc6_eager_fails_sr3(self):
        result, _ = evaluate_source(controller_source("eager"), build_test_case("TC6"))
        assert not result.passed
        assert [v.requirement for v in result.violations] == [SR3]

    def test_tc7_eager_fails_sr2_and_sr3(self):
        result, _ = evaluate_source(controller_source("eager"), build_test_case("TC7"))
        kinds = {v.requirement for v in result.violations}
        assert SR2 in kinds and SR3 in kinds

    def test_spec_mismatch(self):
        _result, trace = evaluate_source(controller_source("naive"), build_test_case("TC6"))
        with pytest.raises(EvaluationError):
            evaluate(trace, build_test_case("TC1"))

    def test_passed_iff_no_violations(self):
        for tc in ("TC1", "TC4", "TC6", "TC7"):
            for name in ("gold", "naive", "eager"):
                result, _ = evaluate_source(
                    controller_source(name), build_test_case(tc))
                assert result.passed == (len(result.violations) == 0)

    def test_adding_collision_never_flips_to_passed(self):
        """Monotone severity: more events can only keep or worsen the verdict."""
        spec = build_test_case("TC6")
        result, trace = evaluate_source(controller_source("eager"), spec)
        assert not result.passed
        extra = SimEvent(EVENT_COLLISION, trace.frames[-1].time, "Ego", "X", 1.0)
        worse = SimTrace(trace.scenario_id, trace.dt, trace.road,
                         trace.frames, trace.events + (extra,))
        assert not evaluate(worse, spec).passed

    def test_expected_manoeuvre_missing_is_unreachable_in_catalog(self):
        """By construction a passive ego always collides in TC1-TC5."""
        for tc in ("TC1", "TC2", "TC3", "TC4", "TC5"):
            result, _ = evaluate_source(controller_source("naive"), build_test_case(tc))
            assert [v.requirement for v in result.violations] == [SR1]

    def test_expected_manoeuvre_missing_on_clean_required_trace(self):
        """A short clean run of a required-manoeuvre scenario reports the miss."""
        spec = with_duration(build_test_case("TC1"), 2.0)  # too short to collide
        result, _ = evaluate_source(controller_source("naive"), spec)
        assert [v.requirement for v in result.violations] == [EXPECTED_MANOEUVRE_MISSING]

    def test_metrics_recorded(self):
        result, trace = evaluate_source(controller_source("gold"), build_test_case("TC1"))
        assert result.metrics.min_headway is not None
        assert result.metrics.min_headway < 0.45
        assert len(result.metrics.lane_change_times) == 1


class TestAccExpectations:
    def test_acc_gold_passes_all(self):
        for tc in ("ACC1", "ACC2", "ACC3"):
            result, _ = evaluate_source(controller_source("acc_gold"), build_test_case(tc))
            assert result.passed, (tc, result.violations)

    def test_acc1_noop_collides(self):
        result, _ = evaluate_source(controller_source("naive"), build_test_case("ACC1"))
        assert [v.requirement for v in result.violations] == [SR1]

    def test_acc3_noop_misses_set_speed(self):
        result, _ = evaluate_source(controller_source("naive"), build_test_case("ACC3"))
        assert [v.requirement for v in result.violations] == [EXPECTED_MANOEUVRE_MISSING]
        assert result.violations[0].event.kind == "SetSpeedNotReached"

    def test_acc1_weak_follower_fails_settle(self):
        """Keeping a 5 s gap is safe but misses the settle band."""
        source = (
            "def controller(obs):\n"
            "    ego = obs['ego']\n"
            "    leads = [a for a in obs['agents']\n"
            "             if a['lane'] == ego['lane'] and a['heading'] == 1]\n"
            "    if not leads:\n"
            "        return 0.6 * (ego['set_speed'] - ego['speed']), 0\n"
            "    gap = leads[0]['s_relative'] - 5.0\n"
            "    accel = 0.4 * (gap - 5.0 * ego['speed']) + 0.9 * (leads[0]['speed'] - ego['speed'])\n"
            "    return max(-6.0, min(2.0, accel)), 0\n")
        result, _ = evaluate_source(source, build_test_case("ACC1"))
        assert [v.requirement for v in result.violations] == [EXPECTED_MANOEUVRE_MISSING]
        assert result.violations[0].event.kind == "TimeGapNotSettled"

    def test_acc_lane_change_is_flagged(self):
        source = (
            "_done = False\n"
            "def controller(obs):\n"
            "    global _done\n"
            "    if not _done and obs['time'] >= 1.0:\n"
            "        _done = True\n"
            "        return 0.0, 1\n"
            "    return 0.0, 0\n")
        result, _ = evaluate_source(source, build_test_case("ACC3"))
        assert SR3 in {v.requirement for v in result.violations}


class TestDetectUnintended:
    def test_gold_change_is_intended(self):
        spec = build_test_case("TC1")
        _result, trace = evaluate_source(controller_source("gold"), spec)
        assert detect_unintended_lane_change(trace, spec) == []

    def test_no_change_gives_empty_list(self):
        spec = build_test_case("TC6")
        _result, trace = evaluate_source(controller_source("naive"), spec)
        assert detect_unintended_lane_change(trace, spec) == []

    def test_empty_road_change_is_unintended(self):
        spec = build_test_case("TC6")
        _result, trace = evaluate_source(controller_source("eager"), spec)
        events = detect_unintended_lane_change(trace, spec)
        assert len(events) == 1
        assert events[0].time == pytest.approx(3.0)

    def test_threshold_config_is_honored(self):
        """With an enormous TTC threshold every change counts as intended."""
        spec = build_test_case("TC6")
        _result, trace = evaluate_source(controller_source("eager"), spec)
        lax = OracleConfig(imminent_ttc_s=4.0, imminent_headway_s=0.75)
        assert detect_unintended_lane_change(trace, spec, lax)
        # an imminent lead exists in TC1 up to 3 s before the gold initiation
        spec1 = build_test_case("TC1")
        _r, trace1 = evaluate_source(controller_source("gold"), spec1)
        strict = OracleConfig(imminent_ttc_s=0.01, imminent_headway_s=0.01)
        assert detect_unintended_lane_change(trace1, spec1, strict)
