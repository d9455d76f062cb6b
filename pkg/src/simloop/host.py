"""Candidate controller execution: spawning, the tick protocol, and failure classification.

Two interchangeable transports exist:

* :class:`InProcessController` compiles and executes the candidate source in
  this interpreter.  It is the default: fast, dependency-free, and fully
  deterministic.  It cannot pre-empt runaway code; per-tick budgets are
  checked after the fact.
* :class:`SubprocessController` launches a child process (normally the shim
  runtime) and speaks the line-delimited JSON protocol with hard wall-clock
  timeouts, so hostile or hanging candidates cannot stall the harness.

Either way every candidate maps to exactly one :class:`ExecutabilityStatus`
per test case, and a crashing candidate never takes the host down.
"""

from __future__ import annotations

import os
import queue
import subprocess
import tempfile
import threading
import time as _time
from dataclasses import dataclass, field

from .errors import ControllerFault
from .protocol import (
    ControlAction,
    ExecutabilityStatus,
    MalformedAction,
    Observation,
    decode_message,
    encode_message,
    executable_status,
    init_message,
    no_code_status,
    observe_message,
    parse_action,
    runtime_failure_status,
    syntax_error_status,
    timeout_status,
)
from .scenarios import ScenarioSpec, VEHICLE_LENGTH, VEHICLE_WIDTH
from .sim import DEFAULT_DT, SimTrace, run_simulation

DEFAULT_TICK_TIMEOUT_S = 1.0
DEFAULT_HANDSHAKE_TIMEOUT_S = 5.0

TRANSPORT_INPROCESS = "inprocess"

CONTROLLER_ENTRY_POINT = "controller"


@dataclass(frozen=True)
class RuntimeConfig:
    """How candidate code is executed.

    ``transport`` is either the string ``"inprocess"`` or an argv prefix for
    a child process speaking the wire protocol; the candidate source path is
    appended as the final argument.
    """

    transport: str | tuple[str, ...] = TRANSPORT_INPROCESS
    tick_timeout_s: float = DEFAULT_TICK_TIMEOUT_S
    handshake_timeout_s: float = DEFAULT_HANDSHAKE_TIMEOUT_S


class SpawnError(Exception):
    """Candidate could not reach a ready state; carries the classified status."""

    def __init__(self, status: ExecutabilityStatus):
        super().__init__(str(status))
        self.status = status


class FunctionController:
    """Adapter for plain ``controller(obs) -> (accel, lane_change)`` callables."""

    def __init__(self, fn, tc_id: str | None = None):
        self._fn = fn
        self._tc_id = tc_id
        self._tick = 0

    def tick(self, obs: Observation) -> ControlAction:
        k = self._tick
        self._tick += 1
        try:
            raw = self._fn(obs.payload())
        except Exception as exc:  # candidate code may raise anything
            raise ControllerFault(runtime_failure_status(
                self._tc_id, k, f"{type(exc).__name__}: {exc}")) from exc
        try:
            return parse_action(raw)
        except MalformedAction as exc:
            raise ControllerFault(runtime_failure_status(self._tc_id, k, str(exc))) from exc

    def close(self) -> None:
        pass


class InProcessController:
    """Loads candidate source into a fresh namespace and calls its entry point."""

    def __init__(self, source: str, spec: ScenarioSpec, dt: float,
                 config: RuntimeConfig):
        self._tc_id = spec.id
        self._timeout = config.tick_timeout_s
        self._tick = 0
        started = _time.monotonic()
        try:
            code = compile(source, "<candidate>", "exec")
        except SyntaxError as exc:
            raise SpawnError(syntax_error_status(
                f"{exc.msg} (line {exc.lineno})", spec.id)) from exc
        namespace: dict = {"__name__": "candidate"}
        try:
            exec(code, namespace)
        except Exception as exc:
            raise SpawnError(runtime_failure_status(
                spec.id, 0, f"error while loading candidate: "
                f"{type(exc).__name__}: {exc}")) from exc
        if _time.monotonic() - started > config.handshake_timeout_s:
            raise SpawnError(timeout_status(spec.id, None, "handshake budget exceeded"))
        fn = namespace.get(CONTROLLER_ENTRY_POINT)
        if not callable(fn):
            raise SpawnError(runtime_failure_status(
                spec.id, 0, f"candidate defines no callable {CONTROLLER_ENTRY_POINT!r}"))
        self._fn = fn

    def tick(self, obs: Observation) -> ControlAction:
        k = self._tick
        self._tick += 1
        started = _time.monotonic()
        try:
            raw = self._fn(obs.payload())
        except Exception as exc:
            raise ControllerFault(runtime_failure_status(
                self._tc_id, k, f"{type(exc).__name__}: {exc}")) from exc
        if _time.monotonic() - started > self._timeout:
            raise ControllerFault(timeout_status(self._tc_id, k, "tick budget exceeded"))
        try:
            return parse_action(raw)
        except MalformedAction as exc:
            raise ControllerFault(runtime_failure_status(self._tc_id, k, str(exc))) from exc

    def close(self) -> None:
        pass


class _LineReader:
    """Background reader so waits on child stdout can be bounded."""

    def __init__(self, stream):
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream) -> None:
        try:
            for line in stream:
                self._queue.put(line)
        except ValueError:
            pass  # stream closed under us
        self._queue.put(None)

    def readline(self, timeout: float) -> str | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError


class SubprocessController:
    """Supervises one child process per scenario over the wire protocol."""

    def __init__(self, source: str, spec: ScenarioSpec, dt: float,
                 config: RuntimeConfig):
        self._tc_id = spec.id
        self._timeout = config.tick_timeout_s
        self._tick = 0
        self._stderr_lines: list[str] = []
        fd, self._source_path = tempfile.mkstemp(suffix=".py", prefix="candidate_")
        with os.fdopen(fd, "w") as handle:
            handle.write(source)
        argv = list(config.transport) + [self._source_path]
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE, text=True, bufsize=1)
        self._reader = _LineReader(self._proc.stdout)
        self._stderr_thread = threading.Thread(
            target=self._drain_stderr, daemon=True)
        self._stderr_thread.start()
        try:
            self._send(init_message(
                spec.id, spec.mode, dt, spec.road.lane_count, spec.road.lane_width,
                VEHICLE_LENGTH, VEHICLE_WIDTH, spec.cruise_speed))
            reply = self._receive(config.handshake_timeout_s)
        except TimeoutError:
            self._kill()
            raise SpawnError(timeout_status(
                spec.id, None, "no ready message within the handshake timeout"))
        except (BrokenPipeError, OSError):
            self._kill()
            raise SpawnError(runtime_failure_status(
                spec.id, None, self._diagnostic("child exited during handshake")))
        if reply is None:
            self._kill()
            raise SpawnError(self._error_status_from_exit(spec.id, None))
        if reply.get("type") == "error":
            status = self._status_from_error(reply, spec.id)
            self._kill()
            raise SpawnError(status)
        if reply.get("type") != "ready":
            self._kill()
            raise SpawnError(runtime_failure_status(
                spec.id, None, f"expected ready, got {reply.get('type')!r}"))

    def _drain_stderr(self) -> None:
        try:
            for line in self._proc.stderr:
                self._stderr_lines.append(line.rstrip("\n"))
        except ValueError:
            pass

    def _diagnostic(self, fallback: str) -> str:
        return self._stderr_lines[-1] if self._stderr_lines else fallback

    def _send(self, line: str) -> None:
        self._proc.stdin.write(line + "\n")
        self._proc.stdin.flush()

    def _receive(self, timeout: float) -> dict | None:
        line = self._reader.readline(timeout)
        if line is None:
            return None
        try:
            return decode_message(line)
        except MalformedAction as exc:
            raise ControllerFault(runtime_failure_status(
                self._tc_id, self._tick, str(exc)))

    def _status_from_error(self, reply: dict, tc_id: str) -> ExecutabilityStatus:
        message = str(reply.get("message", ""))
        if reply.get("kind") == "syntax":
            return syntax_error_status(message, tc_id)
        return runtime_failure_status(tc_id, reply.get("tick"), message)

    def _error_status_from_exit(self, tc_id: str, tick: int | None) -> ExecutabilityStatus:
        return runtime_failure_status(
            tc_id, tick, self._diagnostic("child closed its output stream"))

    def tick(self, obs: Observation) -> ControlAction:
        k = self._tick
        try:
            self._send(observe_message(obs))
            reply = self._receive(self._timeout)
        except TimeoutError:
            self._kill()
            raise ControllerFault(timeout_status(self._tc_id, k))
        except (BrokenPipeError, OSError):
            self._kill()
            raise ControllerFault(self._error_status_from_exit(self._tc_id, k))
        self._tick += 1
        if reply is None:
            self._kill()
            raise ControllerFault(self._error_status_from_exit(self._tc_id, k))
        if reply.get("type") == "error":
            status = self._status_from_error(reply, self._tc_id)
            self._kill()
            raise ControllerFault(status)
        if reply.get("type") != "act":
            self._kill()
            raise ControllerFault(runtime_failure_status(
                self._tc_id, k, f"expected act, got {reply.get('type')!r}"))
        try:
            return parse_action({"accel": reply.get("accel"),
                                 "lane_change": reply.get("lane_change")})
        except MalformedAction as exc:
            self._kill()
            raise ControllerFault(runtime_failure_status(self._tc_id, k, str(exc)))

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._send(encode_message("end"))
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                pass
        self._kill()
        try:
            os.unlink(self._source_path)
        except OSError:
            pass

    def _kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        for stream in (self._proc.stdin, self._proc.stdout, self._proc.stderr):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass


def spawn(code: str, spec: ScenarioSpec, dt: float = DEFAULT_DT,
          config: RuntimeConfig = RuntimeConfig()):
    """Start a controller for one scenario; raises SpawnError on failure.

    An empty source classifies as NoCode; a compile failure as SyntaxError;
    a handshake overrun as Timeout.
    """
    if code is None or not code.strip():
        raise SpawnError(no_code_status())
    if config.transport == TRANSPORT_INPROCESS:
        return InProcessController(code, spec, dt, config)
    return SubprocessController(code, spec, dt, config)


@dataclass
class CandidateRun:
    """Per-test-case outcome of executing one candidate."""

    statuses: dict[str, ExecutabilityStatus] = field(default_factory=dict)
    traces: dict[str, SimTrace] = field(default_factory=dict)

    @property
    def fully_executable(self) -> bool:
        return all(s.executable for s in self.statuses.values())


def run_candidate(source: str | None, specs: list[ScenarioSpec],
                  dt: float = DEFAULT_DT,
                  config: RuntimeConfig = RuntimeConfig(),
                  parallel: int = 1) -> CandidateRun:
    """Execute one candidate over a set of scenarios, one process/namespace each.

    Never raises for candidate-side failures; each test case records its own
    status and, when the run got that far, its trace.
    """
    run = CandidateRun()

    def one(spec: ScenarioSpec) -> tuple[str, ExecutabilityStatus, SimTrace | None]:
        if source is None or not source.strip():
            return spec.id, no_code_status(), None
        try:
            handle = spawn(source, spec, dt, config)
        except SpawnError as exc:
            return spec.id, exc.status, None
        try:
            trace = run_simulation(spec, handle, dt)
        except ControllerFault as exc:
            return spec.id, exc.status, None
        finally:
            handle.close()
        return spec.id, executable_status(spec.id), trace

    if parallel > 1 and len(specs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(one, specs))
    else:
        outcomes = [one(spec) for spec in specs]

    for tc_id, status, trace in outcomes:
        run.statuses[tc_id] = status
        if trace is not None:
            run.traces[tc_id] = trace
    return run
