import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import formulas, programs
from tpdl import parse
from tpdl.oracle import FormulaGenerator, GenConfig
from tpdl.reduction import (
    NotAlphaBeta, NotAnEventuality, finalized_decomposition, reduction_degree, reduction_sets,
    reduction_steps, reduces_to,
)
from tpdl.syntax import (
    Box, Not, Star, classify, eventuality_goal, is_atomic_or_omega, is_eventuality,
)

P = parse


def sets(*groups):
    return tuple(frozenset(P(s) for s in g) for g in groups)


def test_non_eventuality_alpha_has_one_set():
    assert reduction_sets(P("[a+b]p")) == sets(["[a]p", "[b]p"])
    assert reduction_sets(P("~~p")) == sets(["p"])


def test_non_eventuality_beta_has_two_singletons():
    assert reduction_sets(P("~[a+b]p")) == sets(["~[a]p"], ["~[b]p"])


def test_test_star_drops_the_reentering_branch():
    f = P("~[?(s)*]q")
    assert finalized_decomposition(f) == ((frozenset(), P("~q")),)
    assert reduction_sets(f) == sets(["~q"])


def test_triple_star():
    f = P("~[a***]q")
    assert set(reduction_sets(f)) == set(sets(["~q"], ["~[a][a*][a**][a***]q"]))


def test_test_then_atomic_under_star():
    f = P("~[(?(s);a)*]q")
    assert set(reduction_sets(f)) == set(sets(["~q"], ["s", "~[a][(?(s);a)*]q"]))


def test_arrow_choice_under_star():
    f = P("~[(x => y)+?(s)][((x => y)+?(s))*]q")
    want = sets(["~[omega][?(y)][((x => y)+?(s))*]q"],
                ["~x", "~[omega][((x => y)+?(s))*]q"],
                ["s", "~q"])
    assert set(reduction_sets(f)) == set(want)


def test_fig3_eventuality_has_three_singletons():
    got = reduction_sets(P("~[(a+b)*]p"))
    assert set(got) == set(sets(["~p"], ["~[a][(a+b)*]p"], ["~[b][(a+b)*]p"]))


def test_order_is_canonical_and_stable():
    f = P("~[(a+b)*]p")
    assert reduction_sets(f) == reduction_sets(f)
    assert reduction_sets(f)[0] == frozenset([P("~p")])


def test_errors():
    with pytest.raises(NotAlphaBeta):
        reduction_sets(P("p"))
    with pytest.raises(NotAnEventuality):
        finalized_decomposition(P("~[a]p"))


def test_reduction_step_examples():
    f = P("~[(?(s);a)*]q")
    assert reduces_to(f, P("~[a][(?(s);a)*]q"))
    assert not reduces_to(f, P("s"))
    assert reduction_steps(P("~[a]p")) == ()


@given(formulas)
def test_non_eventuality_degree_at_most_two(f):
    if classify(f).kind != "none" and not is_eventuality(f):
        assert reduction_degree(f) <= 2


def star_suffix(f):
    """The innermost starred box of an eventuality."""
    g, last = f.body, None
    while isinstance(g, Box):
        if isinstance(g.prog, Star):
            last = g
        g = g.body
    return last


def has_expected_shape(f, g):
    if g is eventuality_goal(f):
        return True
    if not (isinstance(g, Not) and isinstance(g.body, Box)):
        return False
    if not is_atomic_or_omega(g.body.prog):
        return False
    tail = g.body.body
    target = star_suffix(f)
    while tail is not target:
        if not isinstance(tail, Box):
            return False
        tail = tail.body
    return True


def generated_eventualities(n, seed):
    rng = random.Random(seed)
    gen = FormulaGenerator(GenConfig(seed=seed, max_size=12))
    out = []
    while len(out) < n:
        chi = gen.formula(rng.randint(1, 5))
        if is_eventuality(Not(chi)):
            continue
        body = Box(Star(gen.program(rng.randint(1, 5))), chi)
        for _ in range(rng.randint(0, 2)):
            body = Box(gen.program(rng.randint(1, 4)), body)
        f = Not(body)
        if classify(f).kind != "none":
            out.append(f)
    return out


def test_eventuality_reduction_shape_on_generated_corpus():
    corpus = generated_eventualities(1000, seed=11)
    bad = [(f, g) for f in corpus for _, g in finalized_decomposition(f)
           if not has_expected_shape(f, g)]
    assert bad == []


@given(st.lists(programs, min_size=0, max_size=2), programs, formulas)
def test_eventuality_reduction_shape(prefix, body, chi):
    if is_eventuality(Not(chi)):
        return
    g = Box(Star(body), chi)
    for prog in prefix:
        g = Box(prog, g)
    f = Not(g)
    if classify(f).kind == "none":
        return
    for _, focus in finalized_decomposition(f):
        assert has_expected_shape(f, focus)
