"""Satisfiability checking for Type PDL (PDL with precondition-effect
processes and agent capabilities)."""
from .engine import Config, ResourceLimitExceeded, Verdict, solve
from .parser import ParseError, parse, parse_lines, to_text
from .syntax import (
    BOTTOM, OMEGA, TOP, Arrow, Atom, AtomicProg, Box, Cap, Choice, Not, Seq, Star, Test,
)

__all__ = [
    "Config", "ResourceLimitExceeded", "Verdict", "solve",
    "ParseError", "parse", "parse_lines", "to_text",
    "BOTTOM", "OMEGA", "TOP", "Arrow", "Atom", "AtomicProg", "Box", "Cap", "Choice", "Not",
    "Seq", "Star", "Test",
]
