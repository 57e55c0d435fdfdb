from __future__ import annotations

import ast

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus_programs import PROGRAMS
from helpers import chunk_program, chunk_texts
from streamexec import ChunkerClosedError, StatementChunker, TokenEvent


def feed_text(chunker: StatementChunker, text: str, at: float = 0.0):
    return chunker.feed(TokenEvent(text=text, arrival_time=at))


# -- documented behavior -------------------------------------------------------


def test_simple_statement_confirmed_at_newline():
    chunker = StatementChunker()
    assert feed_text(chunker, 'print("hel', 0.0) == []
    chunks = feed_text(chunker, 'lo")\n', 1.0)
    assert [c.text for c in chunks] == ['print("hello")\n']


def test_compound_needs_lookahead_then_both_emit():
    chunker = StatementChunker()
    assert feed_text(chunker, "def foo():\n    print(1)\n", 0.0) == []
    chunks = feed_text(chunker, "x = 2\n", 1.0)
    assert [c.text for c in chunks] == ["def foo():\n    print(1)\n", "x = 2\n"]


def test_partial_statement_stays_buffered():
    chunker = StatementChunker()
    chunks = feed_text(chunker, "x = 1\nprint(", 0.0)
    assert [c.text for c in chunks] == ["x = 1\n"]
    assert chunker.buffered_text() == "print("
    chunks = feed_text(chunker, "x)\n", 1.0)
    assert [c.text for c in chunks] == ["print(x)\n"]


def test_finish_flushes_pending_candidate():
    chunker = StatementChunker()
    feed_text(chunker, "def f():\n    return 1\n", 0.0)
    assert chunker.buffered_text() == "def f():\n    return 1\n"
    assert [c.text for c in chunker.finish()] == ["def f():\n    return 1\n"]
    assert chunker.buffered_text() == ""


def test_finish_on_empty_buffer():
    chunker = StatementChunker()
    assert chunker.finish() == []


def test_finish_flushes_incomplete_residue():
    chunker = StatementChunker()
    feed_text(chunker, "z = ", 0.0)
    assert [c.text for c in chunker.finish()] == ["z = "]


def test_buffered_text_views():
    chunker = StatementChunker()
    assert chunker.buffered_text() == ""
    feed_text(chunker, "a=1\nb=", 0.0)
    assert chunker.buffered_text() == "b="
    chunker.finish()
    assert chunker.buffered_text() == ""


def test_feed_after_finish_rejected():
    chunker = StatementChunker()
    chunker.finish()
    with pytest.raises(ChunkerClosedError):
        feed_text(chunker, "x", 0.0)
    with pytest.raises(ChunkerClosedError):
        chunker.finish()


def test_arrival_times_must_not_go_backwards():
    chunker = StatementChunker()
    feed_text(chunker, "x", 5.0)
    with pytest.raises(ValueError):
        feed_text(chunker, "y", 4.0)


def test_empty_token_rejected():
    with pytest.raises(ValueError):
        StatementChunker().feed(TokenEvent(text="", arrival_time=0.0))


def test_comments_and_blanks_attach_to_following_chunk():
    texts = chunk_texts("# header\n\nx = 1\n# mid\ny = 2\n", fragment=1)
    assert texts == ["# header\n\nx = 1\n", "# mid\ny = 2\n"]


def test_semicolon_statements_form_one_chunk():
    assert chunk_texts("a=1; b=2\nc=3\n") == ["a=1; b=2\n", "c=3\n"]


def test_decorator_stays_with_definition():
    texts = chunk_texts("@deco\ndef f():\n    pass\ny = f()\n")
    assert texts == ["@deco\ndef f():\n    pass\n", "y = f()\n"]


def test_elif_else_except_finally_extend_the_chunk():
    program = (
        "if a:\n    b()\nelif c:\n    d()\nelse:\n    e()\n"
        "try:\n    f()\nexcept Exception:\n    g()\nfinally:\n    h()\n"
        "i()\n"
    )
    texts = chunk_texts(program)
    assert texts == [
        "if a:\n    b()\nelif c:\n    d()\nelse:\n    e()\n",
        "try:\n    f()\nexcept Exception:\n    g()\nfinally:\n    h()\n",
        "i()\n",
    ]


def test_identifier_prefix_of_keyword_confirms():
    # "else_branch" starts like "else" but cannot continue the if statement.
    texts = chunk_texts("if x:\n    a()\nelse_branch = 1\n")
    assert texts == ["if x:\n    a()\n", "else_branch = 1\n"]


def test_column_zero_lines_inside_brackets_do_not_split():
    program = "if x:\n    a()\n    b = [\n1,\n]\nz = 1\n"
    assert chunk_texts(program) == ["if x:\n    a()\n    b = [\n1,\n]\n", "z = 1\n"]


def test_triple_quoted_string_interior_is_opaque():
    program = 'x = """\ndef fake():\nelse:\n"""\ny = 2\n'
    assert chunk_texts(program) == ['x = """\ndef fake():\nelse:\n"""\n', "y = 2\n"]


def test_syntactically_hopeless_buffer_flushes_at_finish():
    # The unclosed bracket swallows the rest; serial execution would also
    # surface one syntax error for the whole tail.
    program = "a = 1\nb = (2\nc = 3\n"
    assert chunk_texts(program) == ["a = 1\n", "b = (2\nc = 3\n"]


# -- timestamps ----------------------------------------------------------------


def test_simple_statement_timestamps_coincide():
    chunker = StatementChunker()
    feed_text(chunker, "x =", 10.0)
    (chunk,) = feed_text(chunker, " 1\n", 20.0)
    assert chunk.gen_complete_at == 20.0
    assert chunk.detected_at == 20.0


def test_lookahead_delay_is_visible_in_detected_at():
    chunker = StatementChunker()
    feed_text(chunker, "def f():\n    pass\n", 10.0)
    assert feed_text(chunker, "x", 20.0) == []  # "x" might extend, e.g. "xs"
    (chunk,) = feed_text(chunker, " ", 30.0)
    assert chunk.text == "def f():\n    pass\n"
    assert chunk.gen_complete_at == 10.0
    assert chunk.detected_at == 30.0  # arrival of the disambiguating fragment


def test_token_count_counts_tokens_ending_in_span():
    chunker = StatementChunker()
    chunks = []
    for k, piece in enumerate(["x = ", "1\ny", " = 2", "\n"]):
        chunks.extend(feed_text(chunker, piece, float(k)))
    chunks.extend(chunker.finish())
    assert [c.text for c in chunks] == ["x = 1\n", "y = 2\n"]
    # Final characters: token 1 ("x = ") in chunk 1; tokens 2 ("1\ny"),
    # 3 (" = 2") and 4 ("\n") in chunk 2.
    assert [c.token_count for c in chunks] == [1, 3]


# -- corpus properties ---------------------------------------------------------

FRAGMENTATIONS = (1, 4, "line")


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_lossless_reconstruction_and_fragmentation_independence(name):
    program = PROGRAMS[name]
    sequences = []
    for fragment in FRAGMENTATIONS:
        texts = chunk_texts(program, fragment)
        assert "".join(texts) == program
        sequences.append(texts)
    assert sequences[0] == sequences[1] == sequences[2]


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_statement_alignment_against_reference_parse(name):
    program = PROGRAMS[name]
    reference = [ast.dump(node) for node in ast.parse(program).body]
    collected = []
    chunks = chunk_program(program, 1)
    for chunk in chunks:
        try:
            body = ast.parse(chunk.text).body
        except SyntaxError:
            pytest.fail(f"chunk of valid program failed to parse: {chunk.text!r}")
        collected.extend(ast.dump(node) for node in body)
        if chunk is not chunks[-1]:
            assert body, "only the final residue chunk may hold zero statements"
    assert collected == reference


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_spans_tile_the_program(name):
    program = PROGRAMS[name]
    chunks = chunk_program(program, 4)
    expected_start = 0
    for chunk in chunks:
        assert chunk.span == (expected_start, expected_start + len(chunk.text))
        assert program[chunk.span[0] : chunk.span[1]] == chunk.text
        assert chunk.detected_at >= chunk.gen_complete_at
        expected_start = chunk.span[1]
    assert expected_start == len(program)
    assert [c.index for c in chunks] == list(range(1, len(chunks) + 1))


@given(
    program=st.sampled_from(sorted(PROGRAMS)),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_random_fragmentation_matches_whole_feed(program, seed):
    import random

    text = PROGRAMS[program]
    rng = random.Random(seed)
    pieces = []
    pos = 0
    while pos < len(text):
        step = rng.randint(1, 9)
        pieces.append(text[pos : pos + step])
        pos += step
    chunker = StatementChunker()
    fragmented = []
    for k, piece in enumerate(pieces):
        fragmented.extend(chunker.feed(TokenEvent(piece, float(k))))
    fragmented.extend(chunker.finish())
    assert [c.text for c in fragmented] == chunk_texts(text, 10**9)


@given(text=st.text(alphabet=st.sampled_from(list("ax=1:\n #(\")'")), max_size=40))
@settings(max_examples=200, deadline=None)
def test_lossless_even_for_arbitrary_text(text):
    if not text:
        assert chunk_texts(text, 1) == []
        return
    for fragment in (1, 3):
        assert "".join(chunk_texts(text, fragment)) == text
