"""Incremental detection of complete top-level Python statements.

Text arrives fragment by fragment; the chunker accumulates it in a buffer and
emits chunks whose concatenation reproduces the input character for
character. A simple statement is confirmed at its terminating newline. A
compound statement (def/class/if/for/while/try/with, decorators included) is
held back until a following line proves it cannot continue: a line at column
zero whose first token is not one of elif/else/except/finally, or the end of
the stream.
"""

from __future__ import annotations

import ast
import re
from bisect import bisect_right
from dataclasses import dataclass

_CONTINUATION_WORDS = frozenset({"elif", "else", "except", "finally"})
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_COMPOUND_NODES = tuple(
    node
    for node in (
        ast.If,
        ast.For,
        ast.While,
        ast.With,
        ast.Try,
        getattr(ast, "TryStar", None),
        ast.FunctionDef,
        ast.AsyncFunctionDef,
        ast.ClassDef,
        ast.Match,
        ast.AsyncFor,
        ast.AsyncWith,
    )
    if node is not None
)

# Lookahead verdicts.
_CONFIRM = "confirm"
_CONTINUE = "continue"
_WAIT = "wait"


@dataclass(frozen=True)
class TokenEvent:
    """One fragment of the incoming text stream."""

    text: str
    arrival_time: float  # ms on the run's monotonic clock


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of the program holding >= 1 complete top-level
    statements (or the unparseable end-of-stream residue)."""

    index: int
    text: str
    span: tuple[int, int]  # half-open character offsets into the full program
    token_count: int
    gen_complete_at: float  # arrival of the last token overlapping the span
    detected_at: float  # arrival of the token that triggered confirmation


class ChunkerClosedError(RuntimeError):
    """feed/finish called after the stream was already finished."""


class StatementChunker:
    """Single-caller incremental chunker over a paced fragment stream."""

    def __init__(self) -> None:
        self._buffer = ""
        self._committed = 0  # characters already emitted
        self._next_index = 1
        self._closed = False
        self._last_arrival = 0.0
        # Arrival bookkeeping: absolute end offset and arrival time per token.
        self._token_ends: list[int] = []
        self._token_times: list[float] = []
        # Offset (relative to buffer) just past a parsed-complete compound
        # statement awaiting lookahead; stale once a continuation line showed
        # up and a longer parse is required.
        self._candidate_end: int | None = None
        self._candidate_stale = False
        # Line ends <= this offset have already been parse-attempted.
        self._tried_upto = 0

    # -- public API --------------------------------------------------------

    def feed(self, event: TokenEvent) -> list[Chunk]:
        if self._closed:
            raise ChunkerClosedError("feed after finish")
        if not event.text:
            raise ValueError("token text must be non-empty")
        if event.arrival_time < self._last_arrival:
            raise ValueError("arrival times must be non-decreasing")
        self._buffer += event.text
        self._token_ends.append(self._committed + len(self._buffer))
        self._token_times.append(event.arrival_time)
        self._last_arrival = event.arrival_time
        return self._pump(event.arrival_time, at_end=False)

    def finish(self) -> list[Chunk]:
        if self._closed:
            raise ChunkerClosedError("finish called twice")
        now = self._last_arrival
        chunks = self._pump(now, at_end=True)
        if self._candidate_end is not None and not self._candidate_stale:
            chunks.append(self._emit(self._candidate_end, now))
        if self._buffer:
            chunks.append(self._emit(len(self._buffer), now))
        self._closed = True
        return chunks

    def buffered_text(self) -> str:
        return self._buffer

    @property
    def closed(self) -> bool:
        return self._closed

    @property
    def emitted_count(self) -> int:
        return self._next_index - 1

    # -- detection ---------------------------------------------------------

    def _pump(self, now: float, at_end: bool) -> list[Chunk]:
        out = []
        while True:
            chunk = self._step(now, at_end)
            if chunk is None:
                return out
            out.append(chunk)

    def _step(self, now: float, at_end: bool) -> Chunk | None:
        while True:
            if self._candidate_end is not None and not self._candidate_stale:
                verdict = self._lookahead(at_end)
                if verdict == _CONFIRM:
                    return self._emit(self._candidate_end, now)
                if verdict == _WAIT:
                    return None
                # A line that may continue the statement: the candidate can
                # only be superseded by a longer successful parse.
                self._candidate_stale = True
            advanced = self._attempt_parses(now)
            if advanced is None:
                return None
            if isinstance(advanced, Chunk):
                return advanced
            # A fresh candidate was installed; loop back into lookahead.

    def _attempt_parses(self, now: float) -> Chunk | bool | None:
        """Try each untried complete-line end as a statement boundary.

        Returns a Chunk on a confirmed emission, True when a new lookahead
        candidate was installed, None when nothing further can be decided.
        """
        while True:
            nl = self._buffer.find("\n", self._tried_upto)
            if nl == -1:
                return None
            end = nl + 1
            self._tried_upto = end
            stmts = self._parse_prefix(end)
            if not stmts:
                continue
            line_ends = self._line_end_offsets(end)
            ends = [line_ends[s.end_lineno] for s in stmts]
            first_end = ends[0]
            if any(e > first_end for e in ends):
                # Another top-level statement follows, which settles the
                # first one no matter its kind.
                return self._emit(first_end, now)
            if isinstance(stmts[-1], _COMPOUND_NODES):
                self._candidate_end = first_end
                self._candidate_stale = False
                return True
            return self._emit(first_end, now)

    def _parse_prefix(self, end: int) -> list[ast.stmt] | None:
        try:
            tree = ast.parse(self._buffer[:end])
        except (SyntaxError, ValueError):
            return None
        return tree.body

    def _line_end_offsets(self, end: int) -> dict[int, int]:
        """Map 1-based line numbers of buffer[:end] to the offset just past
        each line's newline."""
        offsets = {}
        line = 1
        pos = 0
        while pos < end:
            nl = self._buffer.find("\n", pos, end)
            stop = end if nl == -1 else nl + 1
            offsets[line] = stop
            line += 1
            pos = stop
        return offsets

    def _lookahead(self, at_end: bool) -> str:
        """Classify the text after the pending candidate.

        Blank and comment lines are skipped (they belong to the next chunk).
        The first code line decides: indented or led by a continuation
        keyword means the statement may still grow; anything else confirms.
        """
        pos = self._candidate_end
        n = len(self._buffer)
        while pos < n:
            nl = self._buffer.find("\n", pos)
            if nl == -1:
                return self._classify_partial(self._buffer[pos:], at_end)
            line = self._buffer[pos : nl + 1]
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                pos = nl + 1
                continue
            if line[0].isspace():
                return _CONTINUE
            word = _WORD_RE.match(line)
            if word is None:
                return _CONFIRM
            return _CONTINUE if word.group() in _CONTINUATION_WORDS else _CONFIRM
        return _WAIT

    def _classify_partial(self, tail: str, at_end: bool) -> str:
        stripped = tail.lstrip()
        if not stripped:
            return _WAIT  # may yet become blank, comment or indented code
        if stripped.startswith("#"):
            return _WAIT  # comment, can never disambiguate
        if tail[0].isspace():
            return _CONTINUE  # indented code: the suite continues
        word = _WORD_RE.match(tail)
        if word is None:
            return _CONFIRM
        if word.end() == len(tail) and not at_end:
            return _WAIT  # token may still extend (e.g. "els" -> "elsewhere")
        return _CONTINUE if word.group() in _CONTINUATION_WORDS else _CONFIRM

    # -- emission ----------------------------------------------------------

    def _emit(self, end: int, now: float) -> Chunk:
        start_abs = self._committed
        end_abs = start_abs + end
        text = self._buffer[:end]
        last_token = bisect_right(self._token_ends, end_abs - 1)
        token_count = bisect_right(self._token_ends, end_abs) - bisect_right(
            self._token_ends, start_abs
        )
        chunk = Chunk(
            index=self._next_index,
            text=text,
            span=(start_abs, end_abs),
            token_count=token_count,
            gen_complete_at=self._token_times[last_token],
            detected_at=now,
        )
        self._next_index += 1
        self._buffer = self._buffer[end:]
        self._committed = end_abs
        self._candidate_end = None
        self._candidate_stale = False
        self._tried_upto = 0
        return chunk
