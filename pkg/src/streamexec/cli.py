"""Command-line harness.

Subcommands: replay (paced serial/parallel comparison), sweep (programs x TPS
grid), model (closed-form quantities from a parameter file), check (chunk
fidelity), worker-selftest (protocol and persistence checks against the
interpreter worker).

Exit codes: 0 success, 1 program runtime error surfaced (single-mode replay),
2 infrastructure error, 3 fidelity violation.
"""

from __future__ import annotations

import argparse
import glob
import importlib.util
import json
import shutil
import sys
from pathlib import Path

from . import model as latency_model
from . import session as session_mod
from .metrics import LatencyReport
from .pipeline import PipelineConfig, SimulatedExecutor
from .replay import ReplaySpec, fidelity_check, replay, sweep
from .session import InfrastructureError, WorkerExecutor, start_session

EXIT_OK = 0
EXIT_PROGRAM_ERROR = 1
EXIT_INFRASTRUCTURE = 2
EXIT_FIDELITY = 3


def default_worker_command() -> list[str]:
    exe = shutil.which("streamexec-worker")
    if exe:
        return [exe]
    if importlib.util.find_spec("streamexec_worker") is not None:
        return [sys.executable, "-m", "streamexec_worker"]
    raise InfrastructureError(
        "no interpreter worker found: install the streamexec-worker package "
        "or pass --worker-cmd"
    )


def _worker_factory(args):
    command = args.worker_cmd.split() if args.worker_cmd else default_worker_command()

    def make() -> WorkerExecutor:
        return WorkerExecutor(start_session(command), timeout_ms=args.timeout_ms)

    return make


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        on_error=args.on_error,
        gating_enabled=not args.no_gating,
        batching_enabled=not args.no_batching,
    )


def _executor_factory(args):
    if args.env == "worker":
        return _worker_factory(args)
    return lambda: SimulatedExecutor(
        statement_ms=args.exec_ms, setup_ms=args.setup_ms
    )


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    print(text)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _cmd_replay(args) -> int:
    program = Path(args.program).read_text(encoding="utf-8")
    spec = ReplaySpec(
        program=program,
        tps=args.tps,
        token_chars=args.token_chars,
        t_ft_ms=args.tft_ms,
    )
    reports = replay(
        spec,
        mode=args.mode,
        env=args.env,
        cfg=_pipeline_config(args),
        executor_factory=_executor_factory(args),
    )
    _emit({name: r.to_dict() for name, r in reports.items()}, args.out)
    if args.mode != "both":
        report: LatencyReport = reports[args.mode]
        if report.error_type is not None or report.interrupted:
            return EXIT_PROGRAM_ERROR
    return EXIT_OK


def _cmd_sweep(args) -> int:
    paths = sorted(glob.glob(args.programs, recursive=True))
    if not paths:
        raise InfrastructureError(f"no programs match {args.programs!r}")
    tps_list = [float(x) for x in args.tps_list.split(",") if x]
    rows = sweep(
        paths,
        tps_list,
        args.out,
        env=args.env,
        token_chars=args.token_chars,
        t_ft_ms=args.tft_ms,
        cfg=_pipeline_config(args),
        executor_factory=_executor_factory(args),
    )
    failures = sum(1 for row in rows if "error" in row)
    print(f"wrote {len(rows)} rows to {args.out} ({failures} failed)")
    return EXIT_OK


def _cmd_model(args) -> int:
    data = json.loads(Path(args.params).read_text(encoding="utf-8"))
    params = latency_model.ModelParams(
        L=data["L"],
        v_gen=data["v_gen"],
        T_FT=data["T_FT"],
        N=data["N"],
        l=tuple(data["l"]),
        delta=tuple(data["delta"]),
        T_setup=data["T_setup"],
        T_exe=tuple(data["T_exe"]),
        T_setup_full=data["T_setup_full"],
        T_exe_full=data["T_exe_full"],
    )
    schedule = latency_model.parallel_schedule(params)
    bounds = latency_model.lower_bound(params)
    gen_ms = 1000.0 * params.L / params.v_gen
    out = {
        "t_serial_ms": latency_model.t_serial(params),
        "schedule": {
            "t_g": list(schedule.t_g),
            "t_d": list(schedule.t_d),
            "t_e": list(schedule.t_e),
            "T_parallel_ms": schedule.T_parallel,
        },
        "closed_form_ms": latency_model.parallel_closed_form(params),
        "upper_bound_ms": latency_model.upper_bound(params),
        "overhead_bound_ms": latency_model.overhead_bound(params),
        "lower_bound_ms": {
            "gen": bounds.gen_bound,
            "exec": bounds.exec_bound,
            "composite": bounds.composite,
        },
        "speedup_upper_bound": latency_model.speedup_upper_bound(params),
        "n_star": (
            latency_model.n_star(gen_ms, params.T_exe_full, params.T_setup)
            if params.T_setup > 0
            else None
        ),
    }
    uniform = _uniform_view(params)
    if uniform is not None:
        result = latency_model.uniform_latency(uniform)
        out["uniform"] = {
            "regime": result.regime.value,
            "T_parallel_ms": result.T_parallel,
            "alpha_ms": uniform.alpha,
            "beta_ms": uniform.beta,
        }
    _emit(out, None)
    return EXIT_OK


def _uniform_view(p: latency_model.ModelParams) -> latency_model.UniformParams | None:
    if len(set(p.l)) != 1 or len(set(p.T_exe)) != 1 or len(set(p.delta)) != 1:
        return None
    return latency_model.UniformParams(
        N=p.N,
        alpha=1000.0 * p.l[0] / p.v_gen,
        beta=p.T_setup + p.T_exe[0],
        delta=p.delta[0],
        T_FT=p.T_FT,
        L_over_v=1000.0 * p.L / p.v_gen,
    )


def _cmd_check(args) -> int:
    program = Path(args.program).read_text(encoding="utf-8")
    kinds: list[int | str] = [1, 4, "line"]
    extra = 2
    while len(kinds) < args.fragmentations:
        kinds.insert(1, extra)
        extra += 1
    result = fidelity_check(program, kinds[: max(args.fragmentations, 1)])
    if args.show_chunks:
        for i, text in enumerate(result.chunk_texts, start=1):
            print(f"--- chunk {i} ({len(text)} chars) ---")
            print(text, end="" if text.endswith("\n") else "\n")
    status = "ok" if result.ok else "FIDELITY VIOLATION"
    print(
        f"{status}: {len(result.chunk_texts)} chunks, "
        f"{len(kinds[: max(args.fragmentations, 1)])} fragmentations, "
        f"aligned={result.aligned}"
    )
    for failure in result.failures:
        print(f"  {failure}")
    return EXIT_OK if result.ok else EXIT_FIDELITY


def _cmd_worker_selftest(args) -> int:
    command = args.worker_cmd.split() if args.worker_cmd else default_worker_command()
    handle = start_session(command)
    failures = []

    def check(name: str, passed: bool, detail: str = "") -> None:
        print(f"  [{'ok' if passed else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
        if not passed:
            failures.append(name)

    try:
        pong = session_mod.ping(handle)
        check("ping", pong.ok)
        r1 = session_mod.exec_block(handle, "x = 41")
        r2 = session_mod.exec_block(handle, "print(x + 1)")
        check("state persistence", r1.ok and r2.ok and r2.stdout == "42\n", repr(r2.stdout))
        err = session_mod.exec_block(handle, "1/0")
        check(
            "error reporting",
            err.status == "error"
            and err.exc_type == "ZeroDivisionError"
            and bool(err.traceback),
            str(err.exc_type),
        )
        session_mod.reset(handle)
        gone = session_mod.exec_block(handle, "print(x)")
        check("reset clears namespace", gone.exc_type == "NameError", str(gone.exc_type))
        stats = session_mod._RollingStats()
        for _ in range(100):
            result = session_mod.exec_block(handle, "pass")
            stats.add(max(0.0, result.wall_ms - result.duration_ms))
        check(
            "per-call overhead",
            stats.mean < 20.0 and stats.stddev < stats.mean,
            f"mean {stats.mean:.3f} ms, stddev {stats.stddev:.3f} ms",
        )
    finally:
        session_mod.shutdown(handle)
    print("worker selftest:", "ok" if not failures else f"{len(failures)} failures")
    return EXIT_OK if not failures else EXIT_INFRASTRUCTURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamexec",
        description="Replay programs as paced token streams and execute them "
        "incrementally, comparing against the serial baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--env", choices=("worker", "simulated"), default="simulated")
        p.add_argument("--token-chars", type=int, default=4)
        p.add_argument("--tft-ms", type=float, default=0.0)
        p.add_argument("--on-error", choices=("interrupt", "defer"), default="interrupt")
        p.add_argument("--no-batching", action="store_true")
        p.add_argument("--no-gating", action="store_true")
        p.add_argument("--exec-ms", type=float, default=10.0,
                       help="simulated per-statement execution time")
        p.add_argument("--setup-ms", type=float, default=1.0,
                       help="simulated per-call setup overhead")
        p.add_argument("--worker-cmd", default=None,
                       help="worker argv (space separated); default: discover on PATH")
        p.add_argument("--timeout-ms", type=float, default=None,
                       help="per-block execution timeout (worker env)")

    p_replay = sub.add_parser("replay", help="replay one program, serial and/or parallel")
    p_replay.add_argument("--program", required=True)
    p_replay.add_argument("--tps", type=float, required=True)
    p_replay.add_argument("--mode", choices=("serial", "parallel", "both"), default="both")
    add_run_flags(p_replay)
    p_replay.add_argument("--out", default=None, help="write the JSON report here")
    p_replay.set_defaults(func=_cmd_replay)

    p_sweep = sub.add_parser("sweep", help="replay a set of programs across TPS rates")
    p_sweep.add_argument("--programs", required=True, help="glob of program files")
    p_sweep.add_argument("--tps-list", default="20,50,100,200")
    add_run_flags(p_sweep)
    p_sweep.add_argument("--out", required=True, help="CSV table path (JSONL written alongside)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_model = sub.add_parser("model", help="print closed-form quantities for a parameter file")
    p_model.add_argument("--params", required=True, help="JSON file with ModelParams fields")
    p_model.set_defaults(func=_cmd_model)

    p_check = sub.add_parser("check", help="verify lossless chunk reconstruction")
    p_check.add_argument("--program", required=True)
    p_check.add_argument("--show-chunks", action="store_true")
    p_check.add_argument("--fragmentations", type=int, default=3)
    p_check.set_defaults(func=_cmd_check)

    p_self = sub.add_parser("worker-selftest", help="protocol and persistence checks")
    p_self.add_argument("--worker-cmd", default=None)
    p_self.set_defaults(func=_cmd_worker_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfrastructureError as exc:
        print(f"infrastructure error: {exc}", file=sys.stderr)
        return EXIT_INFRASTRUCTURE
    except FileNotFoundError as exc:
        print(f"infrastructure error: {exc}", file=sys.stderr)
        return EXIT_INFRASTRUCTURE


if __name__ == "__main__":
    sys.exit(main())
