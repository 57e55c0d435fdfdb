"""Persistent interpreter worker.

One process, one shared namespace. Requests arrive as single JSON lines on
stdin; each gets exactly one JSON line reply on stdout. Code blocks execute
with script semantics (shared globals, __name__ == "__main__"), so imports,
variables and definitions persist across blocks. The worker's own
diagnostics, if any, go to stderr; protocol traffic owns stdout.
"""

from __future__ import annotations

import io
import json
import sys
import time
import traceback
from contextlib import redirect_stderr, redirect_stdout

PROTOCOL_VERSION = 1


def _fresh_namespace(namespace: dict) -> None:
    """Reset the shared namespace in place; the dict object itself survives
    so references held by running code stay valid."""
    namespace.clear()
    namespace["__name__"] = "__main__"
    namespace["__builtins__"] = __builtins__


def _format_user_traceback(exc: BaseException) -> str:
    """Traceback without the worker's own frame at the top."""
    tb = exc.__traceback__
    if tb is not None and tb.tb_next is not None:
        tb = tb.tb_next
    return "".join(traceback.format_exception(type(exc), exc, tb))


def _execute(code: str, namespace: dict) -> dict:
    out, err = io.StringIO(), io.StringIO()
    status = "ok"
    failure: dict = {}
    started = time.perf_counter()
    try:
        with redirect_stdout(out), redirect_stderr(err):
            compiled = compile(code, "<block>", "exec")
            exec(compiled, namespace)
    except BaseException as exc:  # noqa: BLE001 - the loop must survive anything
        status = "error"
        failure = {
            "exc_type": type(exc).__name__,
            "exc_message": str(exc),
            "traceback": _format_user_traceback(exc),
        }
    duration_ms = (time.perf_counter() - started) * 1000.0
    return {
        "status": status,
        "stdout": out.getvalue(),
        "stderr": err.getvalue(),
        "duration_ms": duration_ms,
        **failure,
    }


def _reply(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload) + "\n")
    sys.stdout.flush()


def _protocol_error(request_id, message: str) -> dict:
    return {
        "id": request_id,
        "status": "error",
        "stdout": "",
        "stderr": "",
        "exc_type": "ProtocolError",
        "exc_message": message,
        "duration_ms": 0.0,
    }


def serve() -> int:
    namespace: dict = {}
    _fresh_namespace(namespace)
    _reply({"ready": True, "protocol": PROTOCOL_VERSION})
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be an object")
        except ValueError as exc:
            _reply(_protocol_error(-1, f"malformed request: {exc}"))
            continue
        request_id = request.get("id")
        if not isinstance(request_id, int):
            _reply(_protocol_error(-1, "missing integer id"))
            continue
        op = request.get("op")
        if op == "exec":
            code = request.get("code")
            if not isinstance(code, str):
                _reply(_protocol_error(request_id, "exec needs a string code field"))
                continue
            _reply({"id": request_id, **_execute(code, namespace)})
        elif op == "ping":
            _reply({"id": request_id, "status": "ok", "stdout": "", "stderr": "",
                    "duration_ms": 0.0})
        elif op == "reset":
            _fresh_namespace(namespace)
            _reply({"id": request_id, "status": "ok", "stdout": "", "stderr": "",
                    "duration_ms": 0.0})
        elif op == "shutdown":
            _reply({"id": request_id, "status": "ok", "stdout": "", "stderr": "",
                    "duration_ms": 0.0})
            return 0
        else:
            _reply(_protocol_error(request_id, f"unknown op: {op!r}"))
    return 0


def main() -> int:
    try:
        return serve()
    except BrokenPipeError:
        return 0


__all__ = ["main", "serve", "PROTOCOL_VERSION"]
