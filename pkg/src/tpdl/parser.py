"""Concrete syntax: a recursive-descent parser and a precedence-aware printer.

    formula := true | false | IDENT | ~f | [prog]f | <prog>f | cap(IDENT, prog)
             | f & f | f | f | f -> f | (f)
    prog    := IDENT | ?(f) | (f => f) | prog;prog | prog+prog | prog* | omega | (prog)

Binding strength, tightest first: ``*``, ``;``, ``+`` for programs and
``~``, ``&``, ``|``, ``->`` for formulas.  ``->`` associates to the right,
``&``, ``|``, ``;`` and ``+`` to the left.
"""
from __future__ import annotations

import re
from typing import Iterable, List, NamedTuple

from .syntax import (
    BOTTOM, OMEGA, TOP, Arrow, Atom, AtomicProg, Bottom, Box, Cap, Choice, Formula,
    Not, Program, Seq, Star, Term, Test, Top, conj, conj_all, diamond, disj, implies,
)

KEYWORDS = {"true", "false", "omega", "cap"}


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class Token(NamedTuple):
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|=>|[~&|\[\]<>()?;+*,])
""", re.VERBOSE)


def tokenize(src: str) -> List[Token]:
    tokens, pos = [], 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            line, col = _line_col(src, pos)
            raise ParseError(f"unknown token {src[pos]!r}", line, col)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(src)))
    return tokens


def _line_col(src: str, pos: int):
    line = src.count("\n", 0, pos) + 1
    col = pos - (src.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = tokenize(src)
        self.i = 0

    # -- token helpers
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token = None) -> ParseError:
        tok = tok or self.peek()
        line, col = _line_col(self.src, tok.pos)
        return ParseError(message, line, col)

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind != "eof" and tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind == "eof" or tok.text != text:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        self.i += 1
        return tok

    def ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {what}, found {found}")
        self.i += 1
        return tok.text

    # -- formulas
    def formula(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.accept("|"):
            left = disj(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.accept("&"):
            left = conj(left, self.unary())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if self.accept("~"):
            return Not(self.unary())
        if self.accept("["):
            prog = self.program()
            self.expect("]")
            return Box(prog, self.unary())
        if self.accept("<"):
            prog = self.program()
            self.expect(">")
            return diamond(prog, self.unary())
        if self.accept("("):
            f = self.formula()
            self.expect(")")
            return f
        if tok.kind == "ident":
            if tok.text == "true":
                self.i += 1
                return TOP
            if tok.text == "false":
                self.i += 1
                return BOTTOM
            if tok.text == "cap":
                self.i += 1
                self.expect("(")
                agent = self.ident("an agent name")
                self.expect(",")
                prog = self.program()
                self.expect(")")
                return Cap(agent, prog)
            if tok.text == "omega":
                raise self.error("'omega' is a program, not a formula")
            self.i += 1
            return Atom(tok.text)
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise self.error(f"expected a formula, found {found}")

    # -- programs
    def program(self) -> Program:
        left = self.sequence()
        while self.accept("+"):
            left = Choice(left, self.sequence())
        return left

    def sequence(self) -> Program:
        left = self.iteration()
        while self.accept(";"):
            left = Seq(left, self.iteration())
        return left

    def iteration(self) -> Program:
        prog = self.program_atom()
        while self.accept("*"):
            prog = Star(prog)
        return prog

    def program_atom(self) -> Program:
        tok = self.peek()
        if self.accept("?"):
            self.expect("(")
            cond = self.formula()
            self.expect(")")
            return Test(cond)
        if self.accept("("):
            start = self.i
            try:
                pre = self.formula()
                self.expect("=>")
                post = self.formula()
                self.expect(")")
                return Arrow(pre, post)
            except ParseError as arrow_err:
                arrow_reach = self.i
                self.i = start
                try:
                    prog = self.program()
                    self.expect(")")
                    return prog
                except ParseError as prog_err:
                    # report whichever reading got further
                    raise arrow_err if arrow_reach > self.i else prog_err
        if tok.kind == "ident" and tok.text == "omega":
            self.i += 1
            return OMEGA
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.i += 1
            return AtomicProg(tok.text)
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise self.error(f"expected a program, found {found}")

    def done(self) -> None:
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")


def parse(src: str) -> Formula:
    p = _Parser(src)
    f = p.formula()
    p.done()
    return f


def parse_program(src: str) -> Program:
    p = _Parser(src)
    prog = p.program()
    p.done()
    return prog


def parse_lines(src: str) -> List[Formula]:
    """One formula per line; '#' starts a comment; blank lines are skipped."""
    out = []
    for lineno, raw in enumerate(src.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        try:
            out.append(parse(line))
        except ParseError as err:
            raise ParseError(err.message, lineno, err.column) from None
    return out


def parse_file(path) -> List[Formula]:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh.read())


# -- printing ------------------------------------------------------------

_IMP, _OR, _AND, _UNARY = 1, 2, 3, 4
_CHOICE, _SEQ, _STAR, _PATOM = 1, 2, 3, 4


def _formula(f: Formula, level: int) -> str:
    text, own = _formula_parts(f)
    return text if own >= level else "(" + text + ")"


def _formula_parts(f: Formula):
    if isinstance(f, Atom):
        return f.name, _UNARY
    if isinstance(f, Top):
        return "true", _UNARY
    if isinstance(f, Bottom):
        return "false", _UNARY
    if isinstance(f, Cap):
        return f"cap({f.agent},{_program(f.prog, _CHOICE)})", _UNARY
    if isinstance(f, Box):
        if isinstance(f.prog, Test):
            cond = f.prog.cond
            if isinstance(cond, Not):
                return _formula(cond.body, _OR) + " | " + _formula(f.body, _AND), _OR
            return _formula(cond, _OR) + " -> " + _formula(f.body, _IMP), _IMP
        return "[" + _program(f.prog, _CHOICE) + "]" + _formula(f.body, _UNARY), _UNARY
    if isinstance(f, Not):
        inner = f.body
        if isinstance(inner, Box) and isinstance(inner.body, Not):
            if isinstance(inner.prog, Test):
                return (_formula(inner.prog.cond, _AND) + " & "
                        + _formula(inner.body.body, _UNARY)), _AND
            return ("<" + _program(inner.prog, _CHOICE) + ">"
                    + _formula(inner.body.body, _UNARY)), _UNARY
        return "~" + _formula(inner, _UNARY), _UNARY
    raise TypeError(f"not a formula: {f!r}")


def _program(p: Program, level: int) -> str:
    text, own = _program_parts(p)
    return text if own >= level else "(" + text + ")"


def _program_parts(p: Program):
    if isinstance(p, AtomicProg):
        return p.name, _PATOM
    if p is OMEGA:
        return "omega", _PATOM
    if isinstance(p, Arrow):
        return "(" + _formula(p.pre, _IMP) + " => " + _formula(p.post, _IMP) + ")", _PATOM
    if isinstance(p, Test):
        return "?(" + _formula(p.cond, _IMP) + ")", _PATOM
    if isinstance(p, Star):
        return _program(p.body, _STAR) + "*", _STAR
    if isinstance(p, Seq):
        return _program(p.first, _SEQ) + ";" + _program(p.second, _STAR), _SEQ
    if isinstance(p, Choice):
        return _program(p.left, _CHOICE) + "+" + _program(p.right, _SEQ), _CHOICE
    raise TypeError(f"not a program: {p!r}")


def to_text(term: Term) -> str:
    if isinstance(term, Formula):
        return _formula(term, _IMP)
    return _program(term, _CHOICE)


def formulas_to_text(formulas: Iterable[Formula]) -> List[str]:
    from .syntax import sorted_terms
    return [to_text(f) for f in sorted_terms(formulas)]


def conjunction_text(formulas: Iterable[Formula]) -> str:
    return to_text(conj_all(formulas))
