"""simloop: simulation-guided generation and safety verification of vehicle controllers.

A closed loop around four pieces: a scenario catalog of safety-critical
highway situations, a deterministic kinematic simulator, rule-based safety
oracles with a natural-language report generator, and a chat-completion
gateway that turns those reports into correction prompts while a best-so-far
baseline tracks the strongest candidate.
"""

from .errors import (
    ControllerFault,
    EvaluationError,
    LedgerError,
    PromptError,
    ScenarioInfeasible,
    ScenarioSyntaxError,
    ScenarioValidationError,
    SimloopError,
    StatsError,
    TokenLimitExceeded,
    TransportError,
    UnknownScenario,
)
from .protocol import ControlAction, ExecutabilityStatus, Observation
from .scenarios import (
    AgentScript,
    ExpectedOutcome,
    RoadSpec,
    ScenarioSpec,
    build_test_case,
    parse_scenario,
    serialize_scenario,
    solve_initial_offset,
)
from .sim import SimEvent, SimTrace, TraceFrame, VehicleState, run_simulation
from .host import RuntimeConfig, run_candidate, spawn
from .oracle import OracleConfig, TestCaseResult, compute_headway, compute_ttc, evaluate
from .report import TestReport, render_event, render_report
from .llm import (
    CompletionGateway,
    ModelConfig,
    PromptBundle,
    build_correction_prompt,
    build_specification_prompt,
    extract_code,
    request_completion,
)
from .orchestrator import (
    BaselineState,
    CandidateVersion,
    PipelineConfig,
    RunLedger,
    classify_regression,
    compare_to_baseline,
    load_ledger,
    run_pipeline,
    save_ledger,
)
from .stats import RunStats, compute_stats

__version__ = "0.1.0"
