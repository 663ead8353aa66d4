import pytest
from hypothesis import given

from conftest import formulas
from tpdl import ParseError, parse, parse_lines, to_text
from tpdl import syntax
from tpdl.syntax import (
    BOTTOM, OMEGA, TOP, Arrow, Atom, AtomicProg, Box, Cap, Choice, Not, Seq, Star,
)

p, q, r = Atom("p"), Atom("q"), Atom("r")
a, b = AtomicProg("a"), AtomicProg("b")


def test_constructor_mapping():
    assert parse("[a*]p") == Box(Star(a), p)
    assert parse("~[(p=>r)+a]p") == Not(Box(Choice(Arrow(p, r), a), p))
    assert parse("cap(i,(p & q => r))") == Cap("i", Arrow(Not(Box(syntax.Test(p), Not(q))), r))
    assert parse("true") is TOP and parse("false") is BOTTOM
    assert parse("[omega]p") == Box(OMEGA, p)


def test_derived_connectives():
    assert parse("<a>p") == Not(Box(a, Not(p)))
    assert parse("p | q") == Box(syntax.Test(Not(p)), q)
    assert parse("p -> q") == Box(syntax.Test(p), q)


def test_precedence():
    assert parse("[a;b+b*]p") == Box(Choice(Seq(a, b), Star(b)), p)
    assert parse("~p & q | r") == parse("((~p) & q) | r")
    assert parse("p -> q -> r") == parse("p -> (q -> r)")
    assert parse("[a;b;a]p") == Box(Seq(Seq(a, b), a), p)


def test_printer():
    assert to_text(Box(a, p)) == "[a]p"
    assert to_text(Box(OMEGA, p)) == "[omega]p"
    assert to_text(Not(Box(syntax.Test(p), Not(q)))) == "p & q"


@pytest.mark.parametrize("src, line, column", [
    ("[a p", 1, 4),
    ("p &", 1, 4),
    ("p $ q", 1, 3),
    ("cap(i p)", 1, 7),
])
def test_errors_carry_positions(src, line, column):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert (info.value.line, info.value.column) == (line, column)


def test_keywords_are_not_identifiers():
    with pytest.raises(ParseError):
        parse("[cap]p")


def test_lines_and_comments():
    got = parse_lines("# a comment\n~[a]p\n\n[a]q   # trailing\n")
    assert got == [parse("~[a]p"), parse("[a]q")]


def test_error_line_in_multiline_input():
    with pytest.raises(ParseError) as info:
        parse_lines("p\nq &\n")
    assert info.value.line == 2


@given(formulas)
def test_print_then_parse_round_trips(f):
    assert parse(to_text(f)) is f


@given(formulas)
def test_parse_print_parse_is_stable(f):
    text = to_text(f)
    assert to_text(parse(text)) == text
