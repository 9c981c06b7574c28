import pytest

from busycheck.harness import GenConfig, gen_program
from busycheck.lang import (
    DONE,
    EXIT,
    Done,
    Fork,
    LOOP_SKIP,
    ParseError,
    Seq,
    SeqCont,
    cont_atoms,
    normalize,
    parse,
    pretty,
    seq_atoms,
    size,
    to_continuation,
)


def test_parse_waiting_pair():
    assert parse("fork { exit }; loop skip") == Seq(Fork(EXIT), LOOP_SKIP)


def test_parse_single_atom():
    assert parse("exit") == EXIT


def test_parse_two_level_fork():
    expected = Seq(Fork(Seq(Fork(LOOP_SKIP), EXIT)), LOOP_SKIP)
    assert parse("fork { fork { loop skip }; exit }; loop skip") == expected


def test_parse_ignores_whitespace_and_comments():
    text = """
    fork {        # spawn the exiting thread
        exit
    } ;
    loop skip     # busy-wait for it
    """
    assert parse(text) == Seq(Fork(EXIT), LOOP_SKIP)


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("fork { exit ", 1, 13),
        ("loop", 1, 5),
        ("exit; loop slip", 1, 12),
        ("exit exit", 1, 6),
        ("fork { } ", 1, 8),
    ],
)
def test_parse_errors_carry_position(text, line, col):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line == line
    assert err.value.col == col


def test_parse_error_reports_offending_token():
    with pytest.raises(ParseError, match="'slip'"):
        parse("loop slip")


def test_pretty_round_trips_the_examples():
    assert pretty(Seq(Fork(EXIT), LOOP_SKIP)) == "fork { exit }; loop skip"
    assert pretty(LOOP_SKIP) == "loop skip"
    assert pretty(Fork(LOOP_SKIP)) == "fork { loop skip }"


def test_normalize_right_associates():
    a, b, d = EXIT, LOOP_SKIP, EXIT
    assert normalize(Seq(Seq(a, b), d)) == Seq(a, Seq(b, d))


def test_normalize_reaches_fork_bodies():
    c = Fork(Seq(Seq(EXIT, LOOP_SKIP), EXIT))
    assert normalize(c) == Fork(Seq(EXIT, Seq(LOOP_SKIP, EXIT)))


def test_to_continuation_atoms():
    assert to_continuation(EXIT) == SeqCont(EXIT, DONE)
    assert to_continuation(Seq(EXIT, LOOP_SKIP)) == SeqCont(EXIT, SeqCont(LOOP_SKIP, DONE))


def _append(k, tail):
    if isinstance(k, Done):
        return tail
    return SeqCont(k.head, _append(k.tail, tail))


def _cont_oracle(c):
    # structural recursion that appends continuations, independent of the
    # flattening done by to_continuation
    if isinstance(c, Seq):
        return _append(_cont_oracle(c.first), _cont_oracle(c.second))
    return SeqCont(c, DONE)


def test_to_continuation_flattens_left_nesting():
    a, b, d = EXIT, LOOP_SKIP, EXIT
    c = Seq(Seq(a, b), d)
    expected = SeqCont(a, SeqCont(b, SeqCont(d, DONE)))
    assert _cont_oracle(c) == expected
    assert to_continuation(c) == expected


def _generated_commands(seed=0, count=150, max_atoms=9):
    return gen_program(GenConfig(max_atoms=max_atoms, seed=seed, count=count))


def test_round_trip_property():
    for c in _generated_commands(seed=3):
        assert parse(pretty(c)) == normalize(c)


def test_normalize_idempotent_property():
    for c in _generated_commands(seed=4):
        once = normalize(c)
        assert normalize(once) == once


def test_to_continuation_length_matches_atom_count():
    for c in _generated_commands(seed=5):
        cont = to_continuation(normalize(c))
        assert len(cont_atoms(cont)) == len(seq_atoms(normalize(c)))
        assert to_continuation(normalize(c)) == _cont_oracle(c)


def test_size_counts_fork_bodies():
    assert size(parse("fork { fork { loop skip }; exit }; loop skip")) == 5
    assert size(EXIT) == 1
