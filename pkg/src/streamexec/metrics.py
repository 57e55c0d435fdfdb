"""Latency metrics computed from run traces.

NEL is the execution time left exposed after generation ends (the user-visible
execution tail); E2EL is the full wall time from run start to the completion
of execution. Savings are only defined across a matched serial/parallel pair
on the same program.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pipeline import PipelineTrace


@dataclass
class LatencyReport:
    mode: str  # "serial" | "parallel"
    tps: float | None
    token_count: int
    gen_time_ms: float
    e2el_ms: float
    nel_ms: float | None  # absent when interrupted under parallel
    interrupted: bool
    chunk_count: int
    batch_count: int
    first_token_ms: float | None = None
    nel_saving_pct: float | None = None
    e2el_saving_pct: float | None = None
    measured_setup_ms: float | None = None
    pacing_warning: str | None = None
    error_type: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def non_overlapped_ms(trace: PipelineTrace) -> float:
    """Execution time falling after the generation phase, clamped at zero."""
    total = 0.0
    for event in trace.exec_events:
        total += max(0.0, event.finish_at - max(event.dispatch_at, trace.gen_end_at))
    return total


def report_from_trace(
    trace: PipelineTrace,
    mode: str,
    *,
    tps: float | None = None,
    token_count: int | None = None,
) -> LatencyReport:
    gen_time = 0.0
    if trace.first_token_at is not None:
        gen_time = trace.gen_end_at - trace.first_token_at
    nel: float | None
    if mode == "parallel" and trace.interrupted:
        nel = None  # generation was cut short; the tail is undefined
    else:
        nel = non_overlapped_ms(trace)
    return LatencyReport(
        mode=mode,
        tps=tps,
        token_count=trace.tokens_consumed if token_count is None else token_count,
        gen_time_ms=gen_time,
        e2el_ms=trace.end_at - trace.run_start,
        nel_ms=nel,
        interrupted=trace.interrupted,
        chunk_count=trace.chunk_count,
        batch_count=trace.batch_count,
        first_token_ms=trace.first_token_at,
        error_type=trace.error.exc_type if trace.error is not None else None,
    )


def attach_savings(serial: LatencyReport, parallel: LatencyReport) -> None:
    """Fill the savings percentages on the parallel report of a matched pair."""
    if serial.e2el_ms > 0:
        parallel.e2el_saving_pct = (
            100.0 * (serial.e2el_ms - parallel.e2el_ms) / serial.e2el_ms
        )
    if serial.nel_ms and parallel.nel_ms is not None and serial.nel_ms > 0:
        parallel.nel_saving_pct = (
            100.0 * (serial.nel_ms - parallel.nel_ms) / serial.nel_ms
        )


def compute_metrics(
    trace_serial: PipelineTrace | None,
    trace_parallel: PipelineTrace | None,
    *,
    tps: float | None = None,
) -> dict[str, LatencyReport]:
    """Reports for whichever traces exist; savings only for a matched pair."""
    if trace_serial is None and trace_parallel is None:
        raise ValueError("need at least one trace")
    reports: dict[str, LatencyReport] = {}
    if trace_serial is not None:
        reports["serial"] = report_from_trace(trace_serial, "serial", tps=tps)
    if trace_parallel is not None:
        reports["parallel"] = report_from_trace(trace_parallel, "parallel", tps=tps)
    if len(reports) == 2:
        attach_savings(reports["serial"], reports["parallel"])
    return reports
