"""Exception types shared across the harness."""

from __future__ import annotations


class SimloopError(Exception):
    """Base class for all harness errors."""


class UnknownScenario(SimloopError):
    """Requested test-case id is not in the built-in catalog."""


class ScenarioInfeasible(SimloopError):
    """Scenario geometry cannot be realised on the given road."""


class ScenarioSyntaxError(SimloopError):
    """Scenario file could not be parsed."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class ScenarioValidationError(SimloopError):
    """Scenario parsed but violates a semantic constraint."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class EvaluationError(SimloopError):
    """Trace and scenario passed to the oracle do not belong together."""


class PromptError(SimloopError):
    """Prompt section missing or empty."""


class TransportError(SimloopError):
    """Model gateway unreachable after all retries, or playlist exhausted."""


class TokenLimitExceeded(SimloopError):
    """The model endpoint reported a truncated completion."""


class StatsError(SimloopError):
    """Statistics requested over an empty run ledger."""


class LedgerError(SimloopError):
    """Run-ledger directory missing or malformed."""


class ControllerFault(SimloopError):
    """A candidate controller failed mid-run; carries the classified status."""

    def __init__(self, status):
        super().__init__(str(status))
        self.status = status
