"""Fixed-rate token replay of stored programs, plus fidelity checking and
parameter sweeps.

A program is replayed as a mock token stream: consecutive fixed-size
character slices paced at a constant tokens-per-second rate, optionally after
a simulated time-to-first-token. Serial and parallel runs over the same
stream give matched latency reports.
"""

from __future__ import annotations

import ast
import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .chunker import StatementChunker, TokenEvent
from .metrics import LatencyReport, attach_savings, report_from_trace
from .pipeline import (
    Executor,
    PipelineConfig,
    SimulatedExecutor,
    run_parallel,
    run_serial,
)
from .session import InfrastructureError

# Below ~2 ms per token, OS sleep resolution starts to distort wall pacing.
_MIN_WALL_TOKEN_INTERVAL_MS = 2.0


@dataclass(frozen=True)
class ReplaySpec:
    program: str
    tps: float
    token_chars: int = 4
    t_ft_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.tps <= 0:
            raise ValueError("tps must be positive")
        if self.token_chars < 1:
            raise ValueError("token_chars must be >= 1")
        if self.t_ft_ms < 0:
            raise ValueError("t_ft_ms must be >= 0")


def tokenize_replay(spec: ReplaySpec) -> list[TokenEvent]:
    """Slice the program into mock tokens; token k arrives at
    t_ft + k/tps (absolute schedule, so pacing drift cannot accumulate)."""
    step = 1000.0 / spec.tps
    return [
        TokenEvent(
            text=spec.program[off : off + spec.token_chars],
            arrival_time=spec.t_ft_ms + (k + 1) * step,
        )
        for k, off in enumerate(range(0, len(spec.program), spec.token_chars))
    ]


def replay(
    spec: ReplaySpec,
    mode: str = "both",
    env: str = "simulated",
    cfg: PipelineConfig | None = None,
    *,
    executor_factory: Callable[[], Executor] | None = None,
) -> dict[str, LatencyReport]:
    """Run the program as a paced stream in serial and/or parallel mode.

    env="simulated" runs on the virtual clock with a simulated executor
    (instant, deterministic); env="worker" paces tokens on the wall clock
    against a fresh interpreter worker per run. executor_factory overrides
    the default executor construction; it must yield a fresh executor per
    run so serial and parallel never share interpreter state.
    """
    if mode not in ("serial", "parallel", "both"):
        raise ValueError("mode must be serial, parallel or both")
    if env not in ("simulated", "worker"):
        raise ValueError("env must be simulated or worker")
    clock = "virtual" if env == "simulated" else "wall"
    base = cfg or PipelineConfig()
    cfg = dataclasses.replace(base, clock=clock)
    if executor_factory is None:
        if env == "worker":
            raise InfrastructureError(
                "worker replays need an executor_factory (see cli.replay)"
            )
        executor_factory = SimulatedExecutor

    events = tokenize_replay(spec)
    warning = None
    if clock == "wall" and 1000.0 / spec.tps < _MIN_WALL_TOKEN_INTERVAL_MS:
        warning = (
            f"token interval {1000.0 / spec.tps:.2f} ms is below the wall-clock "
            f"pacing resolution ({_MIN_WALL_TOKEN_INTERVAL_MS} ms)"
        )

    reports: dict[str, LatencyReport] = {}
    if mode in ("serial", "both"):
        reports["serial"] = _one_run(run_serial, events, executor_factory, cfg, spec, "serial", warning)
    if mode in ("parallel", "both"):
        reports["parallel"] = _one_run(run_parallel, events, executor_factory, cfg, spec, "parallel", warning)
    if len(reports) == 2:
        attach_savings(reports["serial"], reports["parallel"])
    return reports


def _one_run(runner, events, executor_factory, cfg, spec, mode, warning) -> LatencyReport:
    executor = executor_factory()
    try:
        trace = runner(list(events), executor, cfg)
    finally:
        close = getattr(executor, "close", None)
        if close is not None:
            close()
    report = report_from_trace(trace, mode, tps=spec.tps)
    report.measured_setup_ms = getattr(executor, "setup_overhead", None)
    report.pacing_warning = warning
    return report


# -- fidelity -------------------------------------------------------------------


@dataclass
class FidelityResult:
    ok: bool
    chunk_texts: list[str]
    failures: list[str]
    aligned: bool | None  # None when the program does not parse as a whole


def fragmentations(program: str, kinds: Sequence[int | str]) -> list[list[str]]:
    """Split the program per fragmentation kind: an int means fixed-size
    character slices, "line" means one fragment per line."""
    out = []
    for kind in kinds:
        if kind == "line":
            out.append(program.splitlines(keepends=True))
        else:
            size = int(kind)
            out.append([program[i : i + size] for i in range(0, len(program), size)])
    return out


def run_chunker(fragments: Sequence[str]) -> list[str]:
    chunker = StatementChunker()
    texts = []
    for k, frag in enumerate(fragments):
        for chunk in chunker.feed(TokenEvent(text=frag, arrival_time=float(k))):
            texts.append(chunk.text)
    for chunk in chunker.finish():
        texts.append(chunk.text)
    return texts


def reference_boundaries(program: str) -> set[int] | None:
    """Character offsets at which a whole-program parse ends each top-level
    statement's final line; None when the program is invalid."""
    try:
        tree = ast.parse(program)
    except (SyntaxError, ValueError):
        return None
    line_ends = {}
    line = 1
    pos = 0
    while pos <= len(program):
        nl = program.find("\n", pos)
        stop = len(program) if nl == -1 else nl + 1
        line_ends[line] = stop
        if nl == -1:
            break
        line += 1
        pos = stop
    bounds = {0, len(program)}
    for stmt in tree.body:
        bounds.add(line_ends[stmt.end_lineno])
    return bounds


def fidelity_check(
    program: str, kinds: Sequence[int | str] = (1, 4, "line")
) -> FidelityResult:
    """Chunk the program under several fragmentations and verify lossless,
    fragmentation-independent, statement-aligned reconstruction."""
    failures = []
    sequences = []
    for kind, fragments in zip(kinds, fragmentations(program, kinds)):
        texts = run_chunker(fragments)
        sequences.append(texts)
        if "".join(texts) != program:
            failures.append(f"fragmentation {kind!r}: reconstruction differs")
    for kind, texts in zip(kinds[1:], sequences[1:]):
        if texts != sequences[0]:
            failures.append(
                f"fragmentation {kind!r}: chunk sequence differs from {kinds[0]!r}"
            )
    aligned = None
    reference = reference_boundaries(program)
    if reference is not None and sequences:
        aligned = True
        offset = 0
        for text in sequences[0]:
            offset += len(text)
            if offset not in reference:
                aligned = False
                failures.append(f"chunk boundary at {offset} is not a statement end")
    return FidelityResult(
        ok=not failures,
        chunk_texts=sequences[0] if sequences else [],
        failures=failures,
        aligned=aligned,
    )


# -- sweeps ---------------------------------------------------------------------


def sweep(
    program_paths: Sequence[str | Path],
    tps_list: Sequence[float],
    out_path: str | Path,
    *,
    env: str = "simulated",
    token_chars: int = 4,
    t_ft_ms: float = 0.0,
    cfg: PipelineConfig | None = None,
    executor_factory: Callable[[], Executor] | None = None,
) -> list[dict]:
    """Replay every (program, tps) pair in both modes; write a CSV table plus
    a JSON-lines file with the full reports. Per-row failures are recorded
    and the sweep continues."""
    rows = []
    for path in program_paths:
        path = Path(path)
        program = path.read_text(encoding="utf-8")
        for tps in tps_list:
            row: dict = {"program": path.name, "tps": tps}
            try:
                reports = replay(
                    ReplaySpec(
                        program=program,
                        tps=tps,
                        token_chars=token_chars,
                        t_ft_ms=t_ft_ms,
                    ),
                    mode="both",
                    env=env,
                    cfg=cfg,
                    executor_factory=executor_factory,
                )
            except Exception as exc:  # noqa: BLE001 - sweep must continue
                row["error"] = f"{type(exc).__name__}: {exc}"
            else:
                serial, parallel = reports["serial"], reports["parallel"]
                row.update(
                    serial_e2el_ms=serial.e2el_ms,
                    parallel_e2el_ms=parallel.e2el_ms,
                    serial_nel_ms=serial.nel_ms,
                    parallel_nel_ms=parallel.nel_ms,
                    nel_saving_pct=parallel.nel_saving_pct,
                    e2el_saving_pct=parallel.e2el_saving_pct,
                    interrupted=parallel.interrupted,
                    chunk_count=parallel.chunk_count,
                    batch_count=parallel.batch_count,
                    serial_report=serial.to_dict(),
                    parallel_report=parallel.to_dict(),
                )
            rows.append(row)
    _write_sweep(rows, Path(out_path))
    return rows


_TABLE_COLUMNS = [
    "program",
    "tps",
    "serial_e2el_ms",
    "parallel_e2el_ms",
    "serial_nel_ms",
    "parallel_nel_ms",
    "nel_saving_pct",
    "e2el_saving_pct",
    "interrupted",
    "chunk_count",
    "batch_count",
    "error",
]


def _write_sweep(rows: list[dict], out_path: Path) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_TABLE_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    jsonl = out_path.with_suffix(out_path.suffix + ".jsonl")
    with jsonl.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
