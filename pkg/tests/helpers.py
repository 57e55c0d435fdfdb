"""Shared test utilities."""

from __future__ import annotations

import contextlib
import io
import time
import traceback

from streamexec import Chunk, ExecResult, StatementChunker, TokenEvent


def chunk_program(program: str, fragment: int | str = 1) -> list[Chunk]:
    """Feed a program through a fresh chunker in fixed-size or line fragments."""
    if fragment == "line":
        pieces = program.splitlines(keepends=True)
    else:
        pieces = [program[i : i + fragment] for i in range(0, len(program), fragment)]
    chunker = StatementChunker()
    chunks = []
    for k, piece in enumerate(pieces):
        chunks.extend(chunker.feed(TokenEvent(text=piece, arrival_time=float(k))))
    chunks.extend(chunker.finish())
    return chunks


def chunk_texts(program: str, fragment: int | str = 1) -> list[str]:
    return [c.text for c in chunk_program(program, fragment)]


class InProcessExecutor:
    """Executor that really runs blocks in one shared namespace, in-process.

    Lets pipeline tests assert output and state equivalence without an
    interpreter worker subprocess.
    """

    setup_overhead = 0.0

    def __init__(self) -> None:
        self.globals: dict = {"__name__": "__main__"}
        self._request_id = 0

    def exec(self, text: str) -> ExecResult:
        self._request_id += 1
        out, err = io.StringIO(), io.StringIO()
        started = time.perf_counter()
        try:
            with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
                code = compile(text, "<block>", "exec")
                exec(code, self.globals)
        except BaseException as exc:  # noqa: BLE001 - reported, not raised
            duration = (time.perf_counter() - started) * 1000.0
            return ExecResult(
                request_id=self._request_id,
                status="error",
                stdout=out.getvalue(),
                stderr=err.getvalue(),
                exc_type=type(exc).__name__,
                exc_message=str(exc),
                traceback=traceback.format_exc(),
                duration_ms=duration,
                wall_ms=duration,
            )
        duration = (time.perf_counter() - started) * 1000.0
        return ExecResult(
            request_id=self._request_id,
            status="ok",
            stdout=out.getvalue(),
            stderr=err.getvalue(),
            duration_ms=duration,
            wall_ms=duration,
        )

    def snapshot(self) -> dict:
        """Comparable view of the namespace: plain values stay as-is, other
        objects (functions, classes, modules) collapse to their type name."""
        simple = (int, float, str, bytes, bool, frozenset, type(None))
        out = {}
        for k, v in self.globals.items():
            if k in ("__name__", "__builtins__"):
                continue
            if isinstance(v, simple):
                out[k] = v
            elif isinstance(v, (tuple, list, set, dict)):
                out[k] = repr(v) if _plain(v) else f"<{type(v).__name__}>"
            else:
                out[k] = f"<{type(v).__name__}>"
        return out


def _plain(value) -> bool:
    if isinstance(value, (int, float, str, bytes, bool, type(None))):
        return True
    if isinstance(value, (tuple, list, set, frozenset)):
        return all(_plain(v) for v in value)
    if isinstance(value, dict):
        return all(_plain(k) and _plain(v) for k, v in value.items())
    return False
