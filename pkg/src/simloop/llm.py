"""Prompt construction, the chat-completion gateway, and code extraction.

Two prompt kinds exist.  A specification prompt opens a fresh attempt and
holds [Context, Task Description]; a correction prompt carries feedback and
holds [Context, Scenario Description, Last Version of Code, Test Results,
Task Description], always in that order, with the task description last so
the most important part of the request sits at the end of the prompt.

The gateway speaks an OpenAI-compatible chat-completion wire format, so any
hosted or local server exposing that API works by changing the endpoint
address.  A mock playlist (directory of numbered reply files, consumed in
order) replaces the network entirely and makes runs deterministic.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import PromptError, TokenLimitExceeded, TransportError

KIND_SPECIFICATION = "Specification"
KIND_CORRECTION = "Correction"

LABEL_CONTEXT = "Context"
LABEL_SCENARIO = "Scenario Description"
LABEL_LAST_CODE = "Last Version of Code"
LABEL_TEST_RESULTS = "Test Results"
LABEL_TASK = "Task Description"

SPECIFICATION_LABELS = (LABEL_CONTEXT, LABEL_TASK)
CORRECTION_LABELS = (LABEL_CONTEXT, LABEL_SCENARIO, LABEL_LAST_CODE,
                     LABEL_TEST_RESULTS, LABEL_TASK)

DEFAULT_API_KEY_ENV = "SIMLOOP_API_KEY"


@dataclass(frozen=True)
class PromptSection:
    label: str
    text: str


@dataclass(frozen=True)
class PromptBundle:
    kind: str
    sections: tuple[PromptSection, ...]
    rendered: str


def _render(sections: tuple[PromptSection, ...]) -> str:
    blocks = [f"## {s.label}\n\n{s.text.strip()}" for s in sections]
    return "\n\n".join(blocks) + "\n"


def _bundle(kind: str, labelled: list[tuple[str, str]]) -> PromptBundle:
    sections = []
    for label, text in labelled:
        if not text or not text.strip():
            raise PromptError(f"{kind} prompt section {label!r} is empty")
        sections.append(PromptSection(label, text))
    sections = tuple(sections)
    return PromptBundle(kind=kind, sections=sections, rendered=_render(sections))


def build_specification_prompt(context: str, task: str) -> PromptBundle:
    """First-generation prompt: integration context plus the function description."""
    return _bundle(KIND_SPECIFICATION, [(LABEL_CONTEXT, context), (LABEL_TASK, task)])


def build_correction_prompt(context: str, scenario_descs: list[str], last_code: str,
                            report_text: str, task: str) -> PromptBundle:
    """Feedback prompt: context, scenarios, previous code, test report, task."""
    if not scenario_descs or not all(d.strip() for d in scenario_descs):
        raise PromptError("correction prompt needs non-empty scenario descriptions")
    if not last_code or not last_code.strip():
        raise PromptError("correction prompt needs the last version of the code")
    scenarios = "\n\n".join(d.strip() for d in scenario_descs)
    code_block = f"```python\n{last_code.rstrip()}\n```"
    return _bundle(KIND_CORRECTION, [
        (LABEL_CONTEXT, context),
        (LABEL_SCENARIO, scenarios),
        (LABEL_LAST_CODE, code_block),
        (LABEL_TEST_RESULTS, report_text),
        (LABEL_TASK, task),
    ])


# --------------------------------------------------------------------------
# Gateway
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """Where completions come from: a real endpoint or a mock playlist."""

    endpoint: str | None = None
    model: str = "gpt-4"
    temperature: float = 0.7
    max_output_tokens: int = 4096
    request_timeout_s: float = 60.0
    retries: int = 2
    mock_playlist: str | None = None
    api_key_env: str = DEFAULT_API_KEY_ENV

    def validate(self) -> "ModelConfig":
        if (self.endpoint is None) == (self.mock_playlist is None):
            raise TransportError(
                "exactly one of endpoint and mock_playlist must be configured")
        if self.retries < 0:
            raise TransportError("retry count must be >= 0")
        return self

    def to_json_dict(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "request_timeout_s": self.request_timeout_s,
            "retries": self.retries,
            "mock_playlist": self.mock_playlist,
            "api_key_env": self.api_key_env,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**d)


class MockPlaylist:
    """Scripted replies: the files of a directory, sorted by name, one per call."""

    def __init__(self, directory: str | Path):
        self._files = sorted(p for p in Path(directory).iterdir() if p.is_file())
        if not self._files:
            raise TransportError(f"mock playlist {directory} is empty")
        self._index = 0
        self._lock = threading.Lock()

    def next_reply(self) -> str:
        with self._lock:
            if self._index >= len(self._files):
                raise TransportError(
                    f"mock playlist exhausted after {len(self._files)} replies")
            path = self._files[self._index]
            self._index += 1
        return path.read_text()


class CompletionGateway:
    """One configured reply source; holds playlist position across calls."""

    def __init__(self, config: ModelConfig):
        self.config = config.validate()
        self._playlist = (MockPlaylist(config.mock_playlist)
                          if config.mock_playlist is not None else None)

    def request(self, bundle: PromptBundle) -> str:
        if self._playlist is not None:
            return self._playlist.next_reply()
        return _request_endpoint(bundle, self.config)


def _request_endpoint(bundle: PromptBundle, cfg: ModelConfig) -> str:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": bundle.rendered}],
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
    }
    last_error: Exception | None = None
    for _attempt in range(cfg.retries + 1):
        try:
            response = requests.post(
                cfg.endpoint, json=payload, headers=headers,
                timeout=cfg.request_timeout_s)
            response.raise_for_status()
            data = response.json()
            choice = data["choices"][0]
            if choice.get("finish_reason") == "length":
                raise TokenLimitExceeded(
                    "endpoint reported a truncated completion (token limit)")
            return choice["message"]["content"]
        except TokenLimitExceeded:
            raise
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            last_error = exc
    raise TransportError(
        f"no completion after {cfg.retries + 1} attempts: {last_error}")


def request_completion(bundle: PromptBundle, cfg: ModelConfig,
                       gateway: CompletionGateway | None = None) -> str:
    """Fetch one completion; pass a gateway to keep playlist position across calls."""
    if gateway is None:
        gateway = CompletionGateway(cfg)
    return gateway.request(bundle)


# --------------------------------------------------------------------------
# Code extraction
# --------------------------------------------------------------------------

FENCED_BLOCK_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)

# Heuristic for fence-less replies: the share of non-blank lines that look
# like Python source.  A line counts as code when it is indented or starts
# with a statement keyword, a decorator, a comment, an assignment target, or
# a closing bracket.
_CODE_LINE_RE = re.compile(
    r"^(\s+\S"
    r"|(def|class|import|from|if|elif|else|for|while|try|except|finally"
    r"|return|raise|with|pass|break|continue|global|nonlocal|assert|del"
    r"|lambda|yield|async|await)\b"
    r"|@\w"
    r"|#"
    r"|[A-Za-z_][\w.]*(\s*\[[^\]]*\])?\s*[-+*/%|&^]?=[^=]"
    r"|[)\]}])")
CODE_LINE_THRESHOLD = 0.8


def extract_code(raw: str) -> str | None:
    """Candidate source from a model reply, or None when no code is present.

    All fenced code blocks are concatenated in order.  A reply without
    fences is taken whole iff at least 80% of its non-blank lines parse as
    code lines under the documented heuristic.
    """
    blocks = FENCED_BLOCK_RE.findall(raw)
    if blocks:
        return "\n".join(block.rstrip("\n") for block in blocks) + "\n"
    lines = [line for line in raw.splitlines() if line.strip()]
    if not lines:
        return None
    code_lines = sum(1 for line in lines if _CODE_LINE_RE.match(line))
    if code_lines / len(lines) >= CODE_LINE_THRESHOLD:
        return raw if raw.endswith("\n") else raw + "\n"
    return None
