"""Producer-consumer orchestration of paced generation and execution.

One producer consumes the token stream and drives the chunker; one consumer
drains the pending queue, applies gating and dynamic batching, and executes
merged chunks strictly in order. On the virtual clock the two actors are
interleaved by a deterministic event loop; on the wall clock the producer
runs in a real thread.
"""

from __future__ import annotations

import ast
import queue
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .chunker import Chunk, StatementChunker, TokenEvent
from .clock import VirtualClock, WallClock
from .session import ExecResult, InfrastructureError

ON_ERROR_MODES = ("interrupt", "defer")
CLOCKS = ("wall", "virtual")


class Executor(Protocol):
    """Executes code blocks strictly sequentially against persistent state."""

    setup_overhead: float  # ms estimate of per-call overhead

    def exec(self, text: str) -> ExecResult: ...


@dataclass(frozen=True)
class PipelineConfig:
    on_error: str = "interrupt"
    gating_enabled: bool = True
    batching_enabled: bool = True
    clock: str = "virtual"

    def __post_init__(self) -> None:
        if self.on_error not in ON_ERROR_MODES:
            raise ValueError(f"on_error must be one of {ON_ERROR_MODES}")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}")


@dataclass(frozen=True)
class MergedChunk:
    """A batch of consecutive chunks dispatched as one executor call."""

    member_indices: tuple[int, ...]
    text: str
    ready_at: float  # detected_at of the last member

    @classmethod
    def of(cls, members: Sequence[Chunk]) -> "MergedChunk":
        return cls(
            member_indices=tuple(c.index for c in members),
            text="".join(c.text for c in members),
            ready_at=max(c.detected_at for c in members),
        )


@dataclass(frozen=True)
class ExecEvent:
    merged: MergedChunk
    dispatch_at: float
    setup_ms: float
    finish_at: float
    status: str
    result: ExecResult


@dataclass
class PipelineTrace:
    run_start: float
    first_token_at: float | None
    gen_end_at: float
    exec_events: list[ExecEvent] = field(default_factory=list)
    interrupted: bool = False
    error: ExecResult | None = None
    partial_code: str | None = None
    chunks: list[Chunk] = field(default_factory=list)
    generated_text: str = ""
    tokens_consumed: int = 0

    @property
    def chunk_count(self) -> int:
        return len(self.chunks)

    @property
    def batch_count(self) -> int:
        return len(self.exec_events)

    @property
    def stdout(self) -> str:
        return "".join(e.result.stdout for e in self.exec_events)

    @property
    def end_at(self) -> float:
        last_exec = self.exec_events[-1].finish_at if self.exec_events else self.run_start
        return max(self.gen_end_at, last_exec)


# -- policies ----------------------------------------------------------------


def is_gated(chunk: Chunk) -> bool:
    """True when every top-level statement in the chunk is a function or
    class definition: executing those alone buys no overlap, so they wait to
    ride along with the next substantive chunk."""
    try:
        body = ast.parse(chunk.text).body
    except (SyntaxError, ValueError):
        return False
    return all(
        isinstance(s, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef))
        for s in body
    )


def _dispatchable(pending: Sequence[Chunk], gen_done: bool, cfg: PipelineConfig) -> bool:
    if not pending:
        return False
    if not cfg.gating_enabled or gen_done:
        return True
    return any(not is_gated(c) for c in pending)


def take_batch(
    pending: deque[Chunk], *, batching: bool = True, gating: bool = True
) -> MergedChunk:
    """Remove the next dispatch unit from the queue.

    With batching, that is everything currently pending. Without it, a single
    chunk -- except that a gated prefix always rides along with the first
    non-gated chunk, since deferred declarations only execute merged into the
    next substantive one.
    """
    if not pending:
        raise ValueError("take_batch on an empty queue")
    members: list[Chunk] = []
    if batching:
        while pending:
            members.append(pending.popleft())
    else:
        members.append(pending.popleft())
        if gating:
            while pending and is_gated(members[-1]):
                members.append(pending.popleft())
    return MergedChunk.of(members)


# -- simulated executor -------------------------------------------------------


@dataclass(frozen=True)
class SimulatedError:
    statement: int  # 1-based global statement ordinal that fails
    exc_type: str = "RuntimeError"
    exc_message: str = "simulated failure"


class SimulatedExecutor:
    """Deterministic executor for tests and simulated replays.

    Charges setup_ms per call plus exec_ms per top-level statement; ordinals
    count statements across the whole run. overrides maps a statement ordinal
    to its execution time; error scripts a failure at a given ordinal.
    Unparseable blocks fail like the interpreter would, with a SyntaxError
    and no execution time.
    """

    def __init__(
        self,
        statement_ms: float | None = 0.0,
        setup_ms: float = 0.0,
        overrides: dict[int, float] | None = None,
        error: SimulatedError | None = None,
    ):
        self.statement_ms = statement_ms
        self.setup_overhead = setup_ms
        self.overrides = dict(overrides or {})
        self.error = error
        self._next_ordinal = 1
        self._request_id = 0

    def _statement_cost(self, ordinal: int) -> float:
        if ordinal in self.overrides:
            return self.overrides[ordinal]
        if self.statement_ms is None:
            raise InfrastructureError(
                f"statement {ordinal} not covered by plan and no fallback time set"
            )
        return self.statement_ms

    def exec(self, text: str) -> ExecResult:
        self._request_id += 1
        try:
            count = len(ast.parse(text).body)
        except (SyntaxError, ValueError) as exc:
            return ExecResult(
                request_id=self._request_id,
                status="error",
                exc_type="SyntaxError",
                exc_message=str(exc),
                traceback=f"SyntaxError: {exc}",
                duration_ms=0.0,
                wall_ms=self.setup_overhead,
            )
        duration = 0.0
        for _ in range(count):
            ordinal = self._next_ordinal
            self._next_ordinal += 1
            duration += self._statement_cost(ordinal)
            if self.error is not None and ordinal == self.error.statement:
                return ExecResult(
                    request_id=self._request_id,
                    status="error",
                    exc_type=self.error.exc_type,
                    exc_message=self.error.exc_message,
                    traceback=f"{self.error.exc_type}: {self.error.exc_message}",
                    duration_ms=duration,
                    wall_ms=self.setup_overhead + duration,
                )
        return ExecResult(
            request_id=self._request_id,
            status="ok",
            duration_ms=duration,
            wall_ms=self.setup_overhead + duration,
        )


# -- virtual-clock runner (deterministic event loop) --------------------------


def _run_parallel_virtual(
    events: Sequence[TokenEvent], executor: Executor, cfg: PipelineConfig
) -> PipelineTrace:
    clock = VirtualClock()
    run_start = clock.now()
    chunker = StatementChunker()
    pending: deque[Chunk] = deque()
    trace = PipelineTrace(run_start=run_start, first_token_at=None, gen_end_at=run_start)
    events = list(events)
    i = 0
    gen_done = not events
    halted = False  # defer mode: an error stops all further dispatch
    in_flight: tuple[MergedChunk, float, ExecResult] | None = None
    finish_at = 0.0
    if gen_done:
        for c in chunker.finish():
            pending.append(c)
            trace.chunks.append(c)

    while True:
        if in_flight is None and not halted and _dispatchable(pending, gen_done, cfg):
            merged = take_batch(
                pending, batching=cfg.batching_enabled, gating=cfg.gating_enabled
            )
            dispatch_at = max(clock.now(), merged.ready_at)
            result = executor.exec(merged.text)
            in_flight = (merged, dispatch_at, result)
            finish_at = dispatch_at + max(result.wall_ms, 0.0)

        next_token_at = events[i].arrival_time if not gen_done and i < len(events) else None

        if next_token_at is not None and (in_flight is None or next_token_at <= finish_at):
            clock.advance_to(next_token_at)
            ev = events[i]
            i += 1
            trace.tokens_consumed += 1
            if trace.first_token_at is None:
                trace.first_token_at = ev.arrival_time
            for c in chunker.feed(ev):
                pending.append(c)
                trace.chunks.append(c)
            if i == len(events):
                gen_done = True
                trace.gen_end_at = ev.arrival_time
                for c in chunker.finish():
                    pending.append(c)
                    trace.chunks.append(c)
            continue

        if in_flight is not None:
            clock.advance_to(finish_at)
            merged, dispatch_at, result = in_flight
            in_flight = None
            trace.exec_events.append(
                ExecEvent(
                    merged=merged,
                    dispatch_at=dispatch_at,
                    setup_ms=max(0.0, result.wall_ms - result.duration_ms),
                    finish_at=finish_at,
                    status=result.status,
                    result=result,
                )
            )
            if result.status != "ok":
                trace.error = result
                if cfg.on_error == "interrupt":
                    trace.interrupted = True
                    if not gen_done:
                        trace.gen_end_at = finish_at  # generation cancelled here
                    pending.clear()
                    buffered = "" if chunker.closed else chunker.buffered_text()
                    trace.partial_code = (
                        "".join(c.text for c in trace.chunks) + buffered
                    )
                    trace.generated_text = trace.partial_code
                    return trace
                halted = True
                pending.clear()
            continue

        break

    trace.generated_text = "".join(c.text for c in trace.chunks)
    return trace


def _consume_all_virtual(events: Sequence[TokenEvent], trace: PipelineTrace) -> str:
    text = []
    for ev in events:
        if trace.first_token_at is None:
            trace.first_token_at = ev.arrival_time
        trace.gen_end_at = ev.arrival_time
        trace.tokens_consumed += 1
        text.append(ev.text)
    return "".join(text)


def _run_serial_virtual(
    source: Sequence[TokenEvent] | str, executor: Executor
) -> PipelineTrace:
    clock = VirtualClock()
    trace = PipelineTrace(run_start=clock.now(), first_token_at=None, gen_end_at=clock.now())
    if isinstance(source, str):
        program = source
    else:
        program = _consume_all_virtual(list(source), trace)
        clock.advance_to(trace.gen_end_at)
    result = executor.exec(program)
    dispatch_at = clock.now()
    clock.advance_to(dispatch_at + max(result.wall_ms, 0.0))
    trace.exec_events.append(
        ExecEvent(
            merged=MergedChunk(member_indices=(), text=program, ready_at=dispatch_at),
            dispatch_at=dispatch_at,
            setup_ms=max(0.0, result.wall_ms - result.duration_ms),
            finish_at=clock.now(),
            status=result.status,
            result=result,
        )
    )
    if result.status != "ok":
        trace.error = result
    trace.generated_text = program
    return trace


# -- wall-clock runner (threaded producer) ------------------------------------


_END = "end"
_CHUNK = "chunk"
_FIRST = "first-token"
_CANCELLED = "cancelled"
_FAILED = "producer-failed"


def _produce(
    source: Iterable[TokenEvent],
    clock: WallClock,
    cancel: threading.Event,
    out: queue.Queue,
) -> None:
    chunker = StatementChunker()
    first = True
    consumed = 0
    last_arrival = clock.now()
    try:
        for ev in source:
            if cancel.is_set():
                out.put((_CANCELLED, chunker.buffered_text(), last_arrival, consumed))
                return
            clock.sleep_until(ev.arrival_time)
            realized = TokenEvent(text=ev.text, arrival_time=clock.now())
            if first:
                out.put((_FIRST, realized.arrival_time))
                first = False
            last_arrival = realized.arrival_time
            consumed += 1
            for c in chunker.feed(realized):
                out.put((_CHUNK, c))
        for c in chunker.finish():
            out.put((_CHUNK, c))
        out.put((_END, "", last_arrival, consumed))
    except Exception as exc:  # noqa: BLE001 - forwarded to the consumer
        out.put((_FAILED, exc))


def _run_parallel_wall(
    source: Iterable[TokenEvent], executor: Executor, cfg: PipelineConfig
) -> PipelineTrace:
    clock = WallClock()
    trace = PipelineTrace(run_start=clock.now(), first_token_at=None, gen_end_at=0.0)
    inbox: queue.Queue = queue.Queue()
    cancel = threading.Event()
    producer = threading.Thread(
        target=_produce, args=(source, clock, cancel, inbox), daemon=True
    )
    producer.start()

    pending: deque[Chunk] = deque()
    gen_done = False
    gen_completed = False  # producer reached the natural end of the stream
    halted = False
    leftover_buffer = ""

    def drain(block: bool) -> None:
        nonlocal gen_done, gen_completed, leftover_buffer
        while True:
            try:
                msg = inbox.get(block=block, timeout=60.0 if block else None)
            except queue.Empty:
                if block:
                    raise InfrastructureError("producer stalled for 60 s")
                return
            block = False
            kind = msg[0]
            if kind == _CHUNK:
                pending.append(msg[1])
                trace.chunks.append(msg[1])
            elif kind == _FIRST:
                trace.first_token_at = msg[1]
            elif kind in (_END, _CANCELLED):
                _, leftover_buffer, last, consumed = msg
                gen_done = True
                trace.tokens_consumed = consumed
                if kind == _END:
                    gen_completed = True
                    trace.gen_end_at = last
            elif kind == _FAILED:
                raise InfrastructureError("token source failed") from msg[1]
            if inbox.empty():
                return

    while True:
        drain(block=False)
        if not halted and _dispatchable(pending, gen_done, cfg):
            merged = take_batch(
                pending, batching=cfg.batching_enabled, gating=cfg.gating_enabled
            )
            dispatch_at = clock.now()
            result = executor.exec(merged.text)
            finish_at = clock.now()
            trace.exec_events.append(
                ExecEvent(
                    merged=merged,
                    dispatch_at=dispatch_at,
                    setup_ms=max(0.0, result.wall_ms - result.duration_ms),
                    finish_at=finish_at,
                    status=result.status,
                    result=result,
                )
            )
            if result.status != "ok":
                trace.error = result
                if cfg.on_error == "interrupt":
                    trace.interrupted = True
                    cancel.set()
                    producer.join()
                    drain(block=False)
                    if not gen_completed:
                        trace.gen_end_at = finish_at
                    pending.clear()
                    trace.partial_code = (
                        "".join(c.text for c in trace.chunks) + leftover_buffer
                    )
                    trace.generated_text = trace.partial_code
                    return trace
                halted = True
                pending.clear()
            continue
        if gen_done and (not pending or halted):
            break
        drain(block=True)

    producer.join()
    trace.generated_text = "".join(c.text for c in trace.chunks)
    return trace


def _run_serial_wall(
    source: Iterable[TokenEvent] | str, executor: Executor
) -> PipelineTrace:
    clock = WallClock()
    trace = PipelineTrace(run_start=clock.now(), first_token_at=None, gen_end_at=0.0)
    if isinstance(source, str):
        program = source
        trace.gen_end_at = clock.now()
    else:
        parts = []
        for ev in source:
            clock.sleep_until(ev.arrival_time)
            if trace.first_token_at is None:
                trace.first_token_at = clock.now()
            trace.tokens_consumed += 1
            parts.append(ev.text)
        program = "".join(parts)
        trace.gen_end_at = clock.now()
    dispatch_at = clock.now()
    result = executor.exec(program)
    trace.exec_events.append(
        ExecEvent(
            merged=MergedChunk(member_indices=(), text=program, ready_at=dispatch_at),
            dispatch_at=dispatch_at,
            setup_ms=max(0.0, result.wall_ms - result.duration_ms),
            finish_at=clock.now(),
            status=result.status,
            result=result,
        )
    )
    if result.status != "ok":
        trace.error = result
    trace.generated_text = program
    return trace


# -- public entry points -------------------------------------------------------


def run_parallel(
    source: Iterable[TokenEvent], executor: Executor, cfg: PipelineConfig
) -> PipelineTrace:
    """Overlap token consumption, chunk detection and execution; returns the
    full event trace of the run."""
    if cfg.clock == "virtual":
        return _run_parallel_virtual(list(source), executor, cfg)
    return _run_parallel_wall(source, executor, cfg)


def run_serial(
    source: Iterable[TokenEvent] | str,
    executor: Executor,
    cfg: PipelineConfig | None = None,
) -> PipelineTrace:
    """Baseline: consume the whole stream (or take the text), then execute
    the program as one block."""
    clock = cfg.clock if cfg is not None else "virtual"
    if clock == "virtual":
        return _run_serial_virtual(source, executor)
    return _run_serial_wall(source, executor)
