"""Client for the persistent interpreter worker.

The worker is a separate process speaking newline-delimited JSON over its
stdin/stdout: one request line in, one response line out, one request in
flight at a time. Interpreter state persists in the worker across calls.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

PROTOCOL_VERSION = 1


class InfrastructureError(RuntimeError):
    """Transport or environment failure, distinct from errors raised by the
    executed program itself."""


@dataclass(frozen=True)
class ExecResult:
    """Outcome of executing one code block in the session."""

    request_id: int
    status: str  # "ok" | "error" | "timeout"
    stdout: str = ""
    stderr: str = ""
    exc_type: str | None = None
    exc_message: str | None = None
    traceback: str | None = None
    duration_ms: float = 0.0  # worker-measured execution time
    wall_ms: float = 0.0  # client-measured round trip

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class _RollingStats:
    count: int = 0
    mean: float = 0.0
    _m2: float = 0.0

    def add(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)

    @property
    def stddev(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self._m2 / (self.count - 1))


@dataclass
class SessionHandle:
    process: subprocess.Popen
    next_request_id: int = 1
    setup_stats: _RollingStats = field(default_factory=_RollingStats)
    poisoned: bool = False
    closed: bool = False
    _lines: queue.Queue = field(default_factory=queue.Queue)
    _in_flight: bool = False

    @property
    def measured_setup_ms(self) -> float | None:
        """Rolling estimate of per-call overhead (client wall minus
        worker-measured duration)."""
        return self.setup_stats.mean if self.setup_stats.count else None


def _reader(proc: subprocess.Popen, lines: queue.Queue) -> None:
    try:
        for line in proc.stdout:
            lines.put(line)
    except ValueError:
        pass  # stream closed underneath us during shutdown
    lines.put(None)


def start_session(
    worker_command: Sequence[str], startup_timeout_ms: float = 10_000.0
) -> SessionHandle:
    """Spawn the worker and wait for its ready handshake."""
    try:
        proc = subprocess.Popen(
            list(worker_command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
    except OSError as exc:
        raise InfrastructureError(f"failed to spawn worker: {exc}") from exc
    handle = SessionHandle(process=proc)
    threading.Thread(target=_reader, args=(proc, handle._lines), daemon=True).start()
    try:
        line = handle._lines.get(timeout=startup_timeout_ms / 1000.0)
    except queue.Empty:
        proc.kill()
        raise InfrastructureError(
            f"worker produced no handshake within {startup_timeout_ms:.0f} ms"
        )
    if line is None:
        raise InfrastructureError("worker exited before handshake")
    try:
        hello = json.loads(line)
    except json.JSONDecodeError as exc:
        proc.kill()
        raise InfrastructureError(f"malformed handshake: {line!r}") from exc
    if hello.get("ready") is not True or hello.get("protocol") != PROTOCOL_VERSION:
        proc.kill()
        raise InfrastructureError(f"unexpected handshake: {hello!r}")
    return handle


def _send(handle: SessionHandle, payload: dict) -> None:
    try:
        handle.process.stdin.write(json.dumps(payload) + "\n")
        handle.process.stdin.flush()
    except (OSError, ValueError) as exc:
        raise InfrastructureError(f"worker transport broken: {exc}") from exc


def _receive(handle: SessionHandle, timeout_ms: float | None) -> dict | None:
    """Next response line, or None on timeout."""
    timeout = None if timeout_ms is None else timeout_ms / 1000.0
    try:
        line = handle._lines.get(timeout=timeout)
    except queue.Empty:
        return None
    if line is None:
        raise InfrastructureError("worker closed its output stream")
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise InfrastructureError(f"malformed response: {line!r}") from exc


def _request(
    handle: SessionHandle, op: str, timeout_ms: float | None = None, **extra
) -> ExecResult:
    if handle.closed:
        raise InfrastructureError("session is closed")
    if handle.poisoned:
        raise InfrastructureError("session is poisoned (timed out); restart it")
    if handle._in_flight:
        raise RuntimeError("one request already in flight")
    request_id = handle.next_request_id
    handle.next_request_id += 1
    handle._in_flight = True
    started = time.monotonic()
    try:
        _send(handle, {"op": op, "id": request_id, **extra})
        response = _receive(handle, timeout_ms)
    finally:
        handle._in_flight = False
    wall_ms = (time.monotonic() - started) * 1000.0
    if response is None:
        # A half-executed block leaves undefined interpreter state.
        handle.poisoned = True
        return ExecResult(request_id=request_id, status="timeout", wall_ms=wall_ms)
    if response.get("id") != request_id:
        raise InfrastructureError(
            f"response id {response.get('id')!r} does not match request {request_id}"
        )
    result = ExecResult(
        request_id=request_id,
        status=response.get("status", "error"),
        stdout=response.get("stdout", ""),
        stderr=response.get("stderr", ""),
        exc_type=response.get("exc_type"),
        exc_message=response.get("exc_message"),
        traceback=response.get("traceback"),
        duration_ms=float(response.get("duration_ms", 0.0)),
        wall_ms=wall_ms,
    )
    handle.setup_stats.add(max(0.0, result.wall_ms - result.duration_ms))
    return result


def exec_block(
    handle: SessionHandle, code: str, timeout_ms: float | None = None
) -> ExecResult:
    """Execute one code block in the shared worker namespace."""
    return _request(handle, "exec", timeout_ms=timeout_ms, code=code)


def ping(handle: SessionHandle, timeout_ms: float | None = 5000.0) -> ExecResult:
    return _request(handle, "ping", timeout_ms=timeout_ms)


def reset(handle: SessionHandle, timeout_ms: float | None = 5000.0) -> ExecResult:
    """Clear the worker namespace without restarting the process."""
    return _request(handle, "reset", timeout_ms=timeout_ms)


def shutdown(handle: SessionHandle, grace_ms: float = 2000.0) -> None:
    """Stop the worker: polite shutdown message, then kill. Idempotent."""
    if handle.closed:
        return
    handle.closed = True
    proc = handle.process
    if proc.poll() is None:
        try:
            proc.stdin.write(
                json.dumps({"op": "shutdown", "id": handle.next_request_id}) + "\n"
            )
            proc.stdin.flush()
        except (OSError, ValueError):
            pass
        try:
            proc.wait(timeout=grace_ms / 1000.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
    try:
        proc.stdin.close()
    except OSError:
        pass


class WorkerExecutor:
    """Executor backed by a live worker session."""

    def __init__(self, handle: SessionHandle, timeout_ms: float | None = None):
        self.handle = handle
        self.timeout_ms = timeout_ms

    @property
    def setup_overhead(self) -> float:
        return self.handle.measured_setup_ms or 0.0

    def exec(self, text: str) -> ExecResult:
        return exec_block(self.handle, text, timeout_ms=self.timeout_ms)

    def close(self) -> None:
        shutdown(self.handle)
