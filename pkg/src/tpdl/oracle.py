"""Independent checks: bounded Hintikka-structure search, a random formula
generator and a differential driver tying both to the tableau solver."""
from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Tuple

import z3

from .engine import Config, ResourceLimitExceeded, solve
from .parser import to_text
from .syntax import (
    BOTTOM, OMEGA, TOP, Arrow, Atom, AtomicProg, Box, Cap, Choice, Formula, Not,
    ClosureBudgetExceeded, Program, Seq, Star, Test, arrow_capabilities,
    capability_witness, closure, conj, diamond, disj, implies, is_basic_process, size,
    sorted_terms,
)
from .symbolic import SymbolicModel
from .witness import HintikkaStructure, check_hintikka, repair_shadows, verify_tableau


class SearchBudgetExceeded(RuntimeError):
    pass


class OracleInconsistency(AssertionError):
    """A model found by the solver did not yield a Hintikka structure."""


# -- search universe -----------------------------------------------------

def search_universe(formulas: Iterable[Formula], max_formulas: int = 2000,
                    max_arrow_caps: int = 6) -> frozenset:
    """Closure of the formulas plus every capability witness the labels may need."""
    universe = set()
    todo = list(formulas)
    done_witness = set()
    while todo:
        for f in todo:
            try:
                universe |= closure(f)
            except ClosureBudgetExceeded as exc:
                raise SearchBudgetExceeded(str(exc)) from None
        if len(universe) > max_formulas:
            raise SearchBudgetExceeded(f"search universe exceeds {max_formulas} formulas")
        todo = []
        for f in sorted_terms(universe):
            if not (isinstance(f, Not) and isinstance(f.body, Cap)
                    and is_basic_process(f.body.prog)):
                continue
            caps = arrow_capabilities(universe, f.body.agent)
            if len(caps) > max_arrow_caps:
                raise SearchBudgetExceeded(f"too many capability statements for {f.body.agent}")
            for k in range(len(caps) + 1):
                for gamma in combinations(caps, k):
                    key = (f, gamma)
                    if key in done_witness:
                        continue
                    done_witness.add(key)
                    pres, wit = capability_witness(f.body.prog, gamma)
                    todo.extend(g for g in (*pres, wit) if g not in universe)
    return frozenset(universe)


def _structure_from_model(enc: SymbolicModel, model, universe) -> HintikkaStructure:
    m = enc.m

    def val(x) -> bool:
        return z3.is_true(model.eval(x, model_completion=True))

    ext = {f: [val(x) for x in enc.sat(f)] for f in universe}
    labels = {w: frozenset(f for f in universe if ext[f][w]) for w in range(m)}
    trans = {}
    for a, rel in enc.atomic.items():
        for w in range(m):
            targets = {v for v in range(m) if val(rel[w][v])}
            if targets:
                trans[(w, AtomicProg(a))] = targets
    for w in range(m):
        trans[(w, OMEGA)] = {v for v in range(m) if val(enc.omega[w][v])}
    return HintikkaStructure(labels, trans, roots=[0])


def bounded_search(formulas: Iterable[Formula], max_states: int,
                   timeout_ms: Optional[int] = None,
                   max_formulas: int = 2000) -> Optional[HintikkaStructure]:
    """A Hintikka structure with a state carrying every formula, read off a model
    with at most max_states worlds, or None when no such model exists."""
    if max_states < 1:
        raise ValueError("max_states must be at least 1")
    roots = frozenset(formulas)
    universe = search_universe(roots, max_formulas=max_formulas)
    for m in range(1, max_states + 1):
        enc = SymbolicModel(m, universe)
        for f in roots:
            enc.solver.add(enc.sat(f)[0])
        # force every universe formula to be encoded so labels can be read off
        for f in sorted_terms(universe):
            enc.sat(f)
        enc.tie_assignment()
        if timeout_ms is not None:
            enc.solver.set("timeout", timeout_ms)
        answer = enc.solver.check()
        if answer == z3.unknown:
            raise SearchBudgetExceeded(f"solver gave up at {m} states: "
                                       f"{enc.solver.reason_unknown()}")
        if answer == z3.sat:
            h = repair_shadows(_structure_from_model(enc, enc.solver.model(), universe))
            report = check_hintikka(h)
            if not report.ok:
                raise OracleInconsistency(f"model is not a Hintikka structure: "
                                          f"{report.first_failure()}")
            return h
    return None


# -- random formulas -----------------------------------------------------

FORMULA_WEIGHTS = {
    "atom": 6.0, "top": 0.3, "bottom": 0.3, "not": 3.0, "box": 3.0, "diamond": 3.0,
    "cap": 1.5, "and": 2.0, "or": 1.5, "implies": 1.0,
}
PROGRAM_WEIGHTS = {
    "atomic": 6.0, "omega": 0.5, "test": 1.0, "arrow": 1.5, "seq": 1.5, "choice": 1.5,
    "star": 2.0,
}
_FORMULA_MIN = {"atom": 1, "top": 1, "bottom": 1, "not": 2, "box": 3, "diamond": 4,
                "cap": 2, "and": 6, "or": 5, "implies": 4}
_PROGRAM_MIN = {"atomic": 1, "omega": 3, "test": 2, "arrow": 3, "seq": 4, "choice": 3,
                "star": 3}


@dataclass
class GenConfig:
    seed: int = 0
    max_size: int = 15
    atom_pool: int = 3
    prog_pool: int = 2
    agent_pool: int = 1
    weights: Dict[str, float] = field(default_factory=dict)

    def weight(self, name: str) -> float:
        if name in self.weights:
            return self.weights[name]
        return FORMULA_WEIGHTS.get(name, PROGRAM_WEIGHTS.get(name, 0.0))


class FormulaGenerator:
    """Size-bounded random formulas; one instance yields a deterministic stream."""

    def __init__(self, cfg: GenConfig):
        if min(cfg.atom_pool, cfg.prog_pool, cfg.agent_pool) < 1:
            raise ValueError("generator pools must be non-empty")
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.atoms = [chr(ord("p") + i) if i < 10 else f"p{i}" for i in range(cfg.atom_pool)]
        self.progs = [chr(ord("a") + i) if i < 8 else f"a{i}" for i in range(cfg.prog_pool)]
        self.agents = [chr(ord("i") + i) if i < 3 else f"i{i}" for i in range(cfg.agent_pool)]

    def _pick(self, table: Dict[str, int], budget: int, leaves: bool = True) -> str:
        names = [k for k, low in table.items() if low <= budget and self.cfg.weight(k) > 0
                 and (leaves or low > 1)]
        if not names:
            names = [min(table, key=table.get)]
        # leaves get rarer as the budget grows, so formulas use most of it
        damp = 1.0 if budget <= 2 else 2.0 / budget
        weights = [self.cfg.weight(k) * (damp if table[k] == 1 else 1.0) for k in names]
        return self.rng.choices(names, weights)[0]

    def _split(self, total: int, low: int) -> int:
        """A share of total that leaves at least one unit for the sibling."""
        return self.rng.randint(low, max(low, total - 1))

    def formula(self, budget: int, leaves: bool = True) -> Formula:
        kind = self._pick(_FORMULA_MIN, budget, leaves or budget < 2)
        rng = self.rng
        if kind == "atom":
            return Atom(rng.choice(self.atoms))
        if kind == "top":
            return TOP
        if kind == "bottom":
            return BOTTOM
        if kind == "not":
            return Not(self.formula(budget - 1))
        if kind == "cap":
            return Cap(rng.choice(self.agents), self.program(budget - 1))
        if kind in ("box", "diamond"):
            rest = budget - (1 if kind == "box" else 3)
            prog = self.program(self._split(rest, 1) if rest > 1 else 1)
            body = self.formula(max(1, rest - size(prog)))
            return Box(prog, body) if kind == "box" else diamond(prog, body)
        # binary connectives built from tests
        overhead = {"and": 4, "or": 3, "implies": 2}[kind]
        rest = budget - overhead
        left = self.formula(self._split(rest, 1) if rest > 1 else 1)
        right = self.formula(max(1, rest - size(left)))
        return {"and": conj, "or": disj, "implies": implies}[kind](left, right)

    def program(self, budget: int) -> Program:
        kind = self._pick(_PROGRAM_MIN, budget)
        rng = self.rng
        if kind == "atomic":
            return AtomicProg(rng.choice(self.progs))
        if kind == "omega":
            return OMEGA
        if kind == "test":
            return Test(self.formula(budget - 1))
        if kind == "arrow":
            rest = budget - 1
            pre = self.formula(self._split(rest, 1) if rest > 1 else 1)
            return Arrow(pre, self.formula(max(1, rest - size(pre))))
        if kind == "star":
            return Star(self.program(max(1, (budget - 1) // 2)))
        if kind == "seq":
            rest = budget - 1
            first = self.program(max(1, self._split((rest - 1) // 2, 1)))
            return Seq(first, self.program(max(1, rest - 2 * size(first))))
        rest = budget - 1
        left = self.program(self._split(rest, 1) if rest > 1 else 1)
        return Choice(left, self.program(max(1, rest - size(left))))

    def next(self) -> Formula:
        top = self.cfg.max_size
        for _ in range(100):
            f = self.formula(self.rng.randint(max(1, top // 3), top), leaves=False)
            if size(f) <= top:
                return f
        return Atom(self.atoms[0])


def random_formula(cfg: GenConfig) -> Formula:
    return FormulaGenerator(cfg).next()


def random_formulas(cfg: GenConfig, n: int) -> List[Formula]:
    gen = FormulaGenerator(cfg)
    return [gen.next() for _ in range(n)]


# -- differential driver -------------------------------------------------

@dataclass
class Violation:
    kind: str  # "witness", "completeness" or "oracle"
    formula: str
    detail: str


@dataclass
class DifferentialReport:
    total: int = 0
    sat: int = 0
    unsat: int = 0
    inconclusive: int = 0
    resource_limited: int = 0
    violations: List[Violation] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def summary(self) -> str:
        lines = [f"formulas: {self.total}  sat: {self.sat}  unsat: {self.unsat}  "
                 f"inconclusive: {self.inconclusive}  resource-limited: {self.resource_limited}  "
                 f"violations: {len(self.violations)}  ({self.elapsed_seconds:.1f}s)"]
        for v in self.violations:
            lines.append(f"  [{v.kind}] {v.formula}: {v.detail}")
        return "\n".join(lines)


def check_one(f: Formula, max_states: int, solver_config: Optional[Config] = None,
              search_timeout_ms: Optional[int] = None) -> Tuple[str, Optional[Violation]]:
    """Outcome for one formula: 'sat', 'unsat', 'inconclusive' or 'limited'."""
    text = to_text(f)
    try:
        verdict = solve([f], solver_config)
    except ResourceLimitExceeded:
        return "limited", None
    if verdict.satisfiable:
        w = verify_tableau(verdict.tableau, verdict.root_formulas)
        return "sat", None if w.ok else Violation("witness", text, w.describe())
    try:
        h = bounded_search([f], max_states, timeout_ms=search_timeout_ms)
    except SearchBudgetExceeded:
        return "inconclusive", None
    except OracleInconsistency as exc:
        return "unsat", Violation("oracle", text, str(exc))
    if h is not None:
        return "unsat", Violation("completeness", text,
                                  f"a {len(h.labels)}-state Hintikka structure exists")
    return "unsat", None


def differential_run(n: int, cfg: GenConfig, max_states: int = 3,
                     solver_config: Optional[Config] = None,
                     formulas: Optional[Iterable[Formula]] = None,
                     search_timeout_ms: Optional[int] = 60_000) -> DifferentialReport:
    """Solve n generated formulas (or the given ones) and cross-check every verdict."""
    started = time.monotonic()
    report = DifferentialReport()
    items = list(formulas) if formulas is not None else random_formulas(cfg, n)
    if solver_config is None:
        solver_config = Config(max_nodes=200_000)
    for f in items:
        outcome, violation = check_one(f, max_states, solver_config, search_timeout_ms)
        report.total += 1
        if outcome == "sat":
            report.sat += 1
        elif outcome == "unsat":
            report.unsat += 1
        elif outcome == "inconclusive":
            report.unsat += 1
            report.inconclusive += 1
        else:
            report.resource_limited += 1
        if violation is not None:
            report.violations.append(violation)
    report.elapsed_seconds = time.monotonic() - started
    return report
