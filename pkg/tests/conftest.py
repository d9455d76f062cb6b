"""Shared fixtures: reference controllers, scripted candidates, mock playlists."""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from simloop.host import FunctionController
from simloop.oracle import OracleConfig, evaluate
from simloop.reference import controller_source, load_controller_function
from simloop.scenarios import ACC_TEST_CASES, CAEM_TEST_CASES, build_test_case
from simloop.sim import DEFAULT_DT, run_simulation


@pytest.fixture(scope="session")
def caem_specs():
    return [build_test_case(tc) for tc in CAEM_TEST_CASES]


@pytest.fixture(scope="session")
def acc_specs():
    return [build_test_case(tc) for tc in ACC_TEST_CASES]


def run_source(source: str, spec, dt: float = DEFAULT_DT):
    """Run candidate source on one scenario with a fresh namespace."""
    fn = load_controller_function(source)
    return run_simulation(spec, FunctionController(fn, spec.id), dt)


def evaluate_source(source: str, spec, dt: float = DEFAULT_DT,
                    config: OracleConfig = OracleConfig()):
    trace = run_source(source, spec, dt)
    return evaluate(trace, spec, config), trace


@pytest.fixture(scope="session")
def reference_traces(caem_specs):
    """Traces of the three reference controllers over the full CAEM set."""
    traces = {}
    for name in ("gold", "naive", "eager"):
        source = controller_source(name)
        traces[name] = {
            spec.id: run_source(source, spec) for spec in caem_specs}
    return traces


# --------------------------------------------------------------------------
# Scripted candidates with known pass counts (for playlists and statistics)
# --------------------------------------------------------------------------

def gated_gold(enabled_speeds: tuple[float, ...] | None = None,
               ignore_static: bool = False,
               raise_two_lane: bool = False) -> str:
    """Gold controller behind gates keyed on observable scenario features.

    ``enabled_speeds`` restricts evasive behaviour to scenarios whose initial
    ego speed (rounded to 2 decimals) is listed; elsewhere the candidate is a
    no-op.  ``ignore_static`` turns it off whenever a stationary agent is

    visible, and ``raise_two_lane`` injects a runtime error on two-lane
    roads.  Used to script candidates with predetermined pass counts.
    """
    base = controller_source("gold").replace(
        "def controller(obs):", "def _base_controller(obs):")
    return base + textwrap.dedent(f"""
        ENABLED_SPEEDS = {enabled_speeds!r}
        IGNORE_STATIC = {ignore_static!r}
        RAISE_TWO_LANE = {raise_two_lane!r}


        def controller(obs):
            if RAISE_TWO_LANE and obs["ego"]["lane_count"] == 2:
                raise RuntimeError("two-lane roads unsupported")
            if IGNORE_STATIC and any(a["speed"] < 0.05 for a in obs["agents"]):
                return 0.0, 0
            if ENABLED_SPEEDS is not None and round(obs["ego"]["speed"], 2) not in ENABLED_SPEEDS:
                return 0.0, 0
            return _base_controller(obs)
        """)


SYNTAX_ERROR_SOURCE = "def controller(obs:\n    return 0.0 0\n"

P4_SPEEDS = (33.33, 22.22)
P5_SPEEDS = (33.33, 22.22, 11.11)


def reply_with_code(source: str, preamble: str = "Here is the controller.") -> str:
    return f"{preamble}\n\n```python\n{source}```\n"


def make_playlist(directory: Path, replies: list[str]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for i, reply in enumerate(replies, start=1):
        (directory / f"{i:03d}.txt").write_text(reply)
    return directory


def fig3_replies() -> list[str]:
    """Scripted playlist reproducing the documented 26-version trajectory.

    Initiation 1 opens with a weak candidate (P=2), initiation 2's initial
    reaches P=6 (version 3), version 10 is a syntax-error correction,
    version 18 hits runtime errors on one scenario, and initiation 13 goes
    from P=4 (version 25) to a gold correction (version 26).
    """
    naive = controller_source("naive")
    replies: list[str] = []

    def pair(initial: str, correction: str):
        replies.append(reply_with_code(initial))
        replies.append(reply_with_code(correction))

    pair(naive, naive)                                    # C1, C2
    pair(gated_gold(ignore_static=True), naive)           # C3 (P=6), C4
    pair(naive, gated_gold(P4_SPEEDS))                    # C5, C6 (P=4)
    pair(naive, gated_gold(P5_SPEEDS))                    # C7, C8 (P=5)
    pair(naive, SYNTAX_ERROR_SOURCE)                      # C9, C10 (Ne)
    for _ in range(3):                                    # C11..C16
        pair(naive, naive)
    pair(naive, gated_gold(raise_two_lane=True))          # C17, C18 (Ne, runtime)
    for _ in range(3):                                    # C19..C24
        pair(naive, naive)
    pair(gated_gold(P4_SPEEDS), controller_source("gold"))  # C25 (P=4), C26 gold
    return replies
