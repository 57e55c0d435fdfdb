"""Streaming code execution: detect complete statements in a paced token
stream and run them in a persistent session while generation continues."""

from .chunker import Chunk, ChunkerClosedError, StatementChunker, TokenEvent
from .clock import VirtualClock, WallClock
from .metrics import LatencyReport, compute_metrics, non_overlapped_ms
from .model import (
    LowerBound,
    ModelParams,
    ParameterError,
    Regime,
    Schedule,
    UniformParams,
    lower_bound,
    n_star,
    overhead_bound,
    parallel_closed_form,
    parallel_schedule,
    speedup_upper_bound,
    t_serial,
    uniform_latency,
    uniform_to_params,
    upper_bound,
)
from .pipeline import (
    ExecEvent,
    Executor,
    MergedChunk,
    PipelineConfig,
    PipelineTrace,
    SimulatedError,
    SimulatedExecutor,
    is_gated,
    run_parallel,
    run_serial,
    take_batch,
)
from .replay import ReplaySpec, fidelity_check, replay, sweep, tokenize_replay
from .session import (
    ExecResult,
    InfrastructureError,
    SessionHandle,
    WorkerExecutor,
    exec_block,
    ping,
    reset,
    shutdown,
    start_session,
)

__all__ = [
    "Chunk",
    "ChunkerClosedError",
    "ExecEvent",
    "ExecResult",
    "Executor",
    "InfrastructureError",
    "LatencyReport",
    "LowerBound",
    "MergedChunk",
    "ModelParams",
    "ParameterError",
    "PipelineConfig",
    "PipelineTrace",
    "Regime",
    "ReplaySpec",
    "Schedule",
    "SessionHandle",
    "SimulatedError",
    "SimulatedExecutor",
    "StatementChunker",
    "TokenEvent",
    "UniformParams",
    "VirtualClock",
    "WallClock",
    "WorkerExecutor",
    "compute_metrics",
    "exec_block",
    "fidelity_check",
    "is_gated",
    "lower_bound",
    "n_star",
    "non_overlapped_ms",
    "overhead_bound",
    "parallel_closed_form",
    "parallel_schedule",
    "ping",
    "replay",
    "reset",
    "run_parallel",
    "run_serial",
    "shutdown",
    "speedup_upper_bound",
    "start_session",
    "sweep",
    "t_serial",
    "take_batch",
    "tokenize_replay",
    "uniform_latency",
    "uniform_to_params",
    "upper_bound",
]
