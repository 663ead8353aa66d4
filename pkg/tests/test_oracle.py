import json

import pytest

from corpus import GOLDENS, refute, validity_instances
from tpdl import parse
from tpdl.oracle import (
    FormulaGenerator, GenConfig, SearchBudgetExceeded, bounded_search, differential_run,
    random_formula, random_formulas, search_universe,
)
from tpdl.syntax import (
    Arrow, Atom, AtomicProg, Cap, Not, Star, conj_all, size,
)
from tpdl.witness import check_hintikka

P = parse


def test_single_atom():
    h = bounded_search([P("p")], 1)
    assert h is not None and len(h.labels) == 1
    assert P("p") in h.labels[h.roots[0]]


def test_contradiction_has_no_structure():
    assert bounded_search([P("p"), P("~p")], 3) is None


def test_diamond_forces_a_successor():
    h = bounded_search([P("~[a]p")], 2)
    assert h is not None and check_hintikka(h).ok
    (root,) = h.roots
    (succ,) = h.successors(root, AtomicProg("a"))
    assert P("~p") in h.labels[succ]


def test_one_state_is_not_enough_for_a_fresh_diamond():
    assert bounded_search([P("p"), P("~[a]p")], 1) is None
    assert bounded_search([P("p"), P("~[a]p")], 2) is not None


@pytest.mark.parametrize("name, lines, want", GOLDENS)
def test_goldens(name, lines, want):
    h = bounded_search([P(s) for s in lines], 3)
    assert (h is not None) == (want == "SAT")


@pytest.mark.parametrize("name, text", validity_instances()[::4])
def test_validity_negations_have_no_small_structure(name, text):
    assert bounded_search([P(refute(text))], 2) is None


def test_universe_budget():
    with pytest.raises(SearchBudgetExceeded):
        search_universe([P("~[(a+b)*;(p => q)*]r")], max_formulas=10)


def test_too_many_arrow_capabilities():
    caps = [f"cap(i,(p{k} => q{k}))" for k in range(7)]
    with pytest.raises(SearchBudgetExceeded):
        search_universe([P(c) for c in caps] + [P("~cap(i,a)")])


def test_generator_is_deterministic():
    cfg = GenConfig(seed=9, max_size=20)
    assert random_formula(cfg) is random_formula(cfg)
    assert random_formulas(cfg, 30) == random_formulas(cfg, 30)


def test_generator_respects_size():
    for max_size in (5, 15, 40):
        fs = random_formulas(GenConfig(seed=1, max_size=max_size), 300)
        assert all(size(f) <= max_size for f in fs)


def test_atom_only_weights():
    weights = {k: 0.0 for k in ("top", "bottom", "not", "box", "diamond", "cap", "and", "or",
                                "implies")}
    gen = FormulaGenerator(GenConfig(seed=2, weights={**weights, "atom": 1.0}))
    f = gen.formula(5)
    assert isinstance(f, Atom) and f.name in gen.atoms


def test_generator_reaches_every_constructor():
    seen = set()

    def walk(t):
        seen.add(type(t).__name__)
        for x in t._args:
            if not isinstance(x, str):
                walk(x)

    for f in random_formulas(GenConfig(seed=0, max_size=20, agent_pool=2), 400):
        walk(f)
    assert {"Atom", "Top", "Bottom", "Not", "Box", "Cap", "AtomicProg", "Test", "Arrow",
            "Seq", "Choice", "Star"} <= seen


def test_empty_pools_are_rejected():
    with pytest.raises(ValueError):
        FormulaGenerator(GenConfig(atom_pool=0))


def test_empty_run():
    report = differential_run(0, GenConfig())
    assert (report.total, report.sat, report.unsat, report.violations) == (0, 0, 0, [])


def test_run_on_the_worked_examples():
    fs = [conj_all(P(s) for s in lines) for _, lines, _ in GOLDENS]
    report = differential_run(0, GenConfig(), formulas=fs)
    assert (report.sat, report.unsat, len(report.violations)) == (2, 1, 0)


def test_seeded_run_is_clean():
    report = differential_run(100, GenConfig(seed=42, max_size=15))
    assert report.ok, report.summary()
    data = json.loads(report.to_json())
    assert data["total"] == 100 and data["violations"] == []


def test_capability_witnesses_enter_the_universe():
    u = search_universe([P("~cap(i,a)"), P("cap(i,(p => q))")])
    assert P("~[a][?(~q)]false") in u
    assert Not(Cap("i", Star(Arrow(Atom("p"), Atom("q"))))) not in u
