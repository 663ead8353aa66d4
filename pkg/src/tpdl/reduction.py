"""Decomposition and reduction sets of alpha/beta formulas.

An alpha/beta formula that is not an eventuality reduces through its table
components.  An eventuality is decomposed until every branch reaches a focus
that either re-enters an already visited eventuality (dropped) or admits no
further decomposition; each surviving (tests, focus) pair yields one
reduction set.
"""
from __future__ import annotations

from functools import lru_cache
from typing import FrozenSet, Tuple

from .syntax import (
    OMEGA, Arrow, Box, Choice, Formula, Not, Seq, Star, Test, classify, is_alpha_beta,
    is_eventuality, set_key, term_key,
)

EMPTY: FrozenSet[Formula] = frozenset()


class NotAnEventuality(ValueError):
    pass


class NotAlphaBeta(ValueError):
    pass


def _decompose_step(focus: Formula):
    """Rule outputs for a focus ~[B]chi: a list of (added test or None, new focus)."""
    box = focus.body
    prog, chi = box.prog, box.body
    if isinstance(prog, Star):
        return [(None, Not(chi)), (None, Not(Box(prog.body, box)))]
    if isinstance(prog, Seq):
        return [(None, Not(Box(prog.first, Box(prog.second, chi))))]
    if isinstance(prog, Choice):
        return [(None, Not(Box(prog.left, chi))), (None, Not(Box(prog.right, chi)))]
    if isinstance(prog, Test):
        return [(prog.cond, Not(chi))]
    if isinstance(prog, Arrow) and prog is not OMEGA:
        return [(None, Not(Box(Test(Not(prog.pre)), Box(OMEGA, chi)))),
                (None, Not(Box(OMEGA, Box(Test(prog.post), chi))))]
    return None


@lru_cache(maxsize=None)
def finalized_decomposition(f: Formula) -> Tuple[Tuple[FrozenSet[Formula], Formula], ...]:
    """The finalized (tests, focus) pairs of an alpha/beta eventuality, in canonical order."""
    if not (is_eventuality(f) and is_alpha_beta(f)):
        raise NotAnEventuality(f"not an alpha/beta eventuality: {f}")
    start = (EMPTY, EMPTY, f)
    seen = {start}
    todo = [start]
    final = set()
    while todo:
        principals, tests, focus = todo.pop()
        steps = None
        if is_eventuality(focus) and focus not in principals:
            steps = _decompose_step(focus)
        if steps is None:
            if focus not in principals:
                final.add((tests, focus))
            continue
        grown = principals | {focus}
        for test, nxt in steps:
            triple = (grown, tests | {test} if test is not None else tests, nxt)
            if triple not in seen:
                seen.add(triple)
                todo.append(triple)
    return tuple(sorted(final, key=lambda p: (set_key(p[0] | {p[1]}), term_key(p[1]),
                                              set_key(p[0]))))


@lru_cache(maxsize=None)
def reduction_sets(f: Formula) -> Tuple[FrozenSet[Formula], ...]:
    c = classify(f)
    if c.kind == "none":
        raise NotAlphaBeta(f"not an alpha/beta formula: {f}")
    if is_eventuality(f):
        return tuple(tests | {focus} for tests, focus in finalized_decomposition(f))
    if c.is_alpha:
        return (frozenset(c.components()),)
    return (frozenset([c.first]), frozenset([c.second]))


def reduction_degree(f: Formula) -> int:
    return len(reduction_sets(f))


@lru_cache(maxsize=None)
def reduction_steps(f: Formula) -> Tuple[Tuple[FrozenSet[Formula], Formula], ...]:
    """Pairs (R, g) with R a reduction set of f, g in R and f reducing to g.

    Empty unless f is an alpha/beta formula of the form ~[A]chi.
    """
    if not (isinstance(f, Not) and isinstance(f.body, Box) and is_alpha_beta(f)):
        return ()
    if is_eventuality(f):
        return tuple((tests | {focus}, focus) for tests, focus in finalized_decomposition(f))
    c = classify(f)
    if c.is_alpha:
        return ((reduction_sets(f)[0], c.first),)
    sets = reduction_sets(f)
    return ((sets[0], c.first), (sets[1], c.second))


def reduces_to(f: Formula, g: Formula) -> bool:
    return any(target is g for _, target in reduction_steps(f))


def fully_reduces_within(f: Formula, g: Formula, phi) -> bool:
    """f reduces to g, and some reduction set of f containing g lies inside phi."""
    return reduces_to(f, g) and any(g in r and r <= phi for r in reduction_sets(f))
