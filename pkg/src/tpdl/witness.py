"""Hintikka structures read off a satisfiable tableau, their checker, and the
finite relational model they induce."""
from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np

from .parser import to_text
from .reduction import reduction_sets, reduction_steps
from .syntax import (
    BOTTOM, OMEGA, TOP, Arrow, Atom, AtomicProg, Bottom, Box, Cap, Choice, Formula, Not,
    Program, Seq, Star, Test, Top, arrow_capabilities, capability_witness, classify, closure,
    eventuality_goal, is_atomic_or_omega, is_basic_process, is_eventuality, omega_companion,
    sorted_terms, term_key,
)
from .tableau import SAT, Tableau

CONDITIONS = ("H1", "H2", "H3", "H4", "H5", "H6", "H7", "H8", "H9")


class RootNotSatisfiable(ValueError):
    pass


class InvalidStructure(ValueError):
    pass


class UnknownState(KeyError):
    pass


# -- fat path ------------------------------------------------------------

@dataclass(frozen=True)
class FatPath:
    nodes: FrozenSet[int]
    edges: Tuple[Tuple[int, int, str, Optional[Formula]], ...]

    def children(self, v: int):
        return [(d, k, t) for s, d, k, t in self.edges if s == v]


def fat_path(t: Tableau) -> FatPath:
    """Root, every sat child of an included partial node, every child of an included state."""
    if t.root is None or t.nodes[t.root].status != SAT:
        raise RootNotSatisfiable("the tableau root is not sat")
    seen = {t.root}
    edges = []
    todo = [t.root]
    while todo:
        v = todo.pop()
        node = t.nodes[v]
        for dst, kind, tag in node.children:
            if node.partial and t.nodes[dst].status != SAT:
                continue
            edges.append((v, dst, kind, tag))
            if dst not in seen:
                seen.add(dst)
                todo.append(dst)
    return FatPath(frozenset(seen), tuple(edges))


# -- structures ----------------------------------------------------------

@dataclass
class HintikkaStructure:
    labels: Dict[int, FrozenSet[Formula]]
    trans: Dict[Tuple[int, Program], Set[int]] = field(default_factory=dict)
    roots: List[int] = field(default_factory=list)
    shadow_of: Dict[int, int] = field(default_factory=dict)

    @property
    def states(self) -> List[int]:
        return sorted(self.labels)

    def successors(self, s: int, prog: Program) -> Set[int]:
        return self.trans.get((s, prog), set())

    def transitions(self):
        for (s, prog), targets in sorted(self.trans.items(),
                                         key=lambda kv: (kv[0][0], term_key(kv[0][1]))):
            for t in sorted(targets):
                yield s, prog, t

    def states_containing(self, formulas: Iterable[Formula]) -> List[int]:
        need = frozenset(formulas)
        return [s for s in self.states if need <= self.labels[s]]

    def to_dict(self) -> dict:
        return {
            "states": [{
                "id": s,
                "label": [to_text(f) for f in sorted_terms(self.labels[s])],
                **({"shadow_of": self.shadow_of[s]} if s in self.shadow_of else {}),
            } for s in self.states],
            "transitions": [{"from": s, "program": to_text(p), "to": d}
                            for s, p, d in self.transitions()],
            "roots": list(self.roots),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def to_dot(self) -> str:
        lines = ["digraph hintikka {", '  node [shape=box, fontname="Helvetica", fontsize=10];']
        for s in self.states:
            text = "\\n".join(_esc(to_text(f)) for f in sorted_terms(self.labels[s]))
            extra = ", peripheries=2" if s in self.roots else ""
            style = ", style=dashed" if s in self.shadow_of else ""
            lines.append(f'  s{s} [label="s{s}\\n{text}"{extra}{style}];')
        for s, p, d in self.transitions():
            lines.append(f'  s{s} -> s{d} [label="{_esc(to_text(p))}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _end_states(t: Tableau, fat: Dict[int, list], start: int) -> Set[int]:
    """States reached from start through partial nodes of the fat path."""
    if not t.nodes[start].partial:
        return {start}
    out, seen, todo = set(), {start}, [start]
    while todo:
        v = todo.pop()
        for d in fat.get(v, ()):
            if not t.nodes[d].partial:
                out.add(d)
            elif d not in seen:
                seen.add(d)
                todo.append(d)
    return out


def extract_hintikka(t: Tableau, repair: bool = True) -> HintikkaStructure:
    fp = fat_path(t)
    fat = defaultdict(list)
    for s, d, _, _ in fp.edges:
        fat[s].append(d)
    states = sorted(v for v in fp.nodes if not t.nodes[v].partial)
    trans: Dict[Tuple[int, Program], Set[int]] = defaultdict(set)
    for s, d, _, tag in fp.edges:
        if t.nodes[s].partial or tag is None:
            continue
        if isinstance(tag, Not) and isinstance(tag.body, Box) and is_atomic_or_omega(tag.body.prog):
            trans[(s, tag.body.prog)] |= _end_states(t, fat, d)
    h = HintikkaStructure(
        labels={v: t.nodes[v].phi for v in states},
        trans=dict(trans),
        roots=sorted(_end_states(t, fat, t.root)),
    )
    return repair_shadows(h) if repair else h


def repair_shadows(h: HintikkaStructure) -> HintikkaStructure:
    """Give every ordered state pair at most one transition label.

    For each pair joined by several labels the canonically smallest one is
    kept and every other label A is redirected to a shadow copy of the target
    shared by all sources that need (target, A).  A shadow carries the
    target's label and its repaired outgoing transitions.
    """
    by_pair: Dict[Tuple[int, int], Set[Program]] = defaultdict(set)
    for (s, prog), targets in h.trans.items():
        for d in targets:
            by_pair[(s, d)].add(prog)
    labels = dict(h.labels)
    shadow_of = dict(h.shadow_of)
    shadows: Dict[Tuple[int, Program], int] = {}
    next_id = max(labels, default=-1) + 1
    trans: Dict[Tuple[int, Program], Set[int]] = defaultdict(set)
    for (s, d) in sorted(by_pair):
        progs = sorted_terms(by_pair[(s, d)])
        trans[(s, progs[0])].add(d)
        for prog in progs[1:]:
            key = (d, prog)
            if key not in shadows:
                shadows[key] = next_id
                labels[next_id] = labels[d]
                shadow_of[next_id] = shadow_of.get(d, d)
                next_id += 1
            trans[(s, prog)].add(shadows[key])
    outgoing = defaultdict(list)
    for (s, prog), targets in list(trans.items()):
        outgoing[s].append((prog, set(targets)))
    for (d, _), copy in shadows.items():
        for prog, targets in outgoing.get(d, ()):
            trans[(copy, prog)] |= targets
    out = HintikkaStructure(labels, dict(trans), list(h.roots), shadow_of)
    if _h9_failures(out):
        raise AssertionError("shadow repair left a state pair with two labels")
    return out


# -- checking ------------------------------------------------------------

@dataclass(frozen=True)
class Failure:
    condition: str
    state: int
    formula: Optional[Formula]
    detail: str = ""

    def __str__(self):
        f = f" {to_text(self.formula)}" if self.formula is not None else ""
        d = f" ({self.detail})" if self.detail else ""
        return f"{self.condition} at s{self.state}:{f}{d}"


@dataclass
class HintikkaReport:
    failures: Dict[str, List[Failure]]

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())

    def passed(self, condition: str) -> bool:
        return not self.failures[condition]

    def first_failure(self) -> Optional[Failure]:
        for c in CONDITIONS:
            if self.failures[c]:
                return self.failures[c][0]
        return None

    def summary(self) -> str:
        return ", ".join(f"{c}:{'ok' if self.passed(c) else len(self.failures[c])}"
                         for c in CONDITIONS)

    def to_dict(self) -> dict:
        return {c: [str(f) for f in self.failures[c]] for c in CONDITIONS}


def _h9_failures(h: HintikkaStructure) -> List[Failure]:
    labels_between: Dict[Tuple[int, int], Set[Program]] = defaultdict(set)
    for (s, prog), targets in h.trans.items():
        for d in targets:
            labels_between[(s, d)].add(prog)
    return [Failure("H9", s, None, f"to s{d} via " + ", ".join(map(to_text, sorted_terms(ps))))
            for (s, d), ps in sorted(labels_between.items()) if len(ps) > 1]


def _structure_path_exists(h: HintikkaStructure, s: int, f: Formula) -> bool:
    goal = eventuality_goal(f)
    seen = {(s, f)}
    todo = deque([(s, f)])
    while todo:
        st, g = todo.popleft()
        if g is goal:
            return True
        nxt = []
        if isinstance(g, Not) and isinstance(g.body, Box) and is_atomic_or_omega(g.body.prog):
            body = Not(g.body.body)
            nxt = [(d, body) for d in h.successors(st, g.body.prog) if body in h.labels[d]]
        else:
            label = h.labels[st]
            nxt = [(st, g2) for r, g2 in reduction_steps(g) if r <= label]
        for pair in nxt:
            if pair not in seen:
                seen.add(pair)
                todo.append(pair)
    return False


def check_hintikka(h: HintikkaStructure) -> HintikkaReport:
    fails: Dict[str, List[Failure]] = {c: [] for c in CONDITIONS}
    all_labels = [h.labels[s] for s in h.states]
    for s in h.states:
        label = h.labels[s]
        if BOTTOM in label or Not(TOP) in label:
            fails["H1"].append(Failure("H1", s, BOTTOM if BOTTOM in label else Not(TOP)))
        for f in sorted_terms(label):
            if isinstance(f, Not):
                body = f.body
                if isinstance(body, Atom) and body in label:
                    fails["H1"].append(Failure("H1", s, f, "complement present"))
                if isinstance(body, Cap):
                    if isinstance(body.prog, Test):
                        fails["H2"].append(Failure("H2", s, f))
                    elif is_basic_process(body.prog):
                        if body in label:
                            fails["H1"].append(Failure("H1", s, f, "complement present"))
                        gamma = arrow_capabilities(label, body.agent)
                        pres, wit = capability_witness(body.prog, gamma)
                        need = frozenset(pres) | {wit}
                        if not any(need <= lab for lab in all_labels):
                            fails["H4"].append(Failure("H4", s, f, "no refuting state"))
            if classify(f).kind != "none":
                if not any(r <= label for r in reduction_sets(f)):
                    fails["H3"].append(Failure("H3", s, f, "no reduction set in the label"))
                if is_eventuality(f) and not _structure_path_exists(h, s, f):
                    fails["H8"].append(Failure("H8", s, f, "no structure path to the goal"))
            if isinstance(f, Box) and isinstance(f.prog, AtomicProg):
                for d in sorted(h.successors(s, f.prog)):
                    if f.body not in h.labels[d]:
                        fails["H5"].append(Failure("H5", s, f, f"missing at s{d}"))
            if isinstance(f, Box) and f.prog is OMEGA:
                companion = omega_companion(f)
                if companion not in label:
                    fails["H6"].append(Failure("H6", s, f, f"missing {to_text(companion)}"))
                for (src, _), targets in h.trans.items():
                    if src != s:
                        continue
                    for d in sorted(targets):
                        if f.body not in h.labels[d]:
                            fails["H6"].append(Failure("H6", s, f, f"missing at s{d}"))
            if (isinstance(f, Not) and isinstance(f.body, Box)
                    and is_atomic_or_omega(f.body.prog)):
                want = Not(f.body.body)
                if not any(want in h.labels[d] for d in h.successors(s, f.body.prog)):
                    fails["H7"].append(Failure("H7", s, f, "no successor"))
    fails["H9"] = _h9_failures(h)
    return HintikkaReport(fails)


# -- the induced model ---------------------------------------------------

def _compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int32) @ b.astype(np.int32)) > 0


def reflexive_transitive_closure(rel: np.ndarray) -> np.ndarray:
    out = rel | np.eye(rel.shape[0], dtype=bool)
    while True:
        nxt = _compose(out, out)
        if np.array_equal(nxt, out):
            return out
        out = nxt


class Model:
    """Finite relational model: states are 0..n-1, relations are boolean matrices."""

    def __init__(self, state_ids: List[int], atomic: Dict[str, np.ndarray],
                 step_union: np.ndarray, valuation: Dict[str, np.ndarray],
                 declared: Dict[str, List[FrozenSet[Program]]], max_rounds: int = 64,
                 labels: Optional[List[FrozenSet[Formula]]] = None):
        self.state_ids = state_ids
        self.index = {s: i for i, s in enumerate(state_ids)}
        self.n = len(state_ids)
        self.atomic = atomic
        self.omega_rel = reflexive_transitive_closure(step_union)
        self.valuation = valuation
        # declared[agent][w] = atomic/arrow programs B with cap(agent, B) in L(w)
        self.declared = declared
        self.labels = labels
        self.assignment: Optional[Dict[str, np.ndarray]] = None
        # "iteration", "search", "open-search" or None when nothing settled
        self.settled_by: Optional[str] = None
        self.converged = self._settle_assignment(max_rounds)

    def _reset(self) -> None:
        self._rel: Dict[Program, np.ndarray] = {}
        self._sat: Dict[Formula, np.ndarray] = {}

    def _settle_assignment(self, max_rounds: int) -> bool:
        """Fix the capability assignment: agent -> (n, n, n) stack, one relation per state.

        Arrow relations depend on formula truth and capability truth depends
        on the assignment, so iterate from the declared-capability guess
        until the assignment reproduces itself.  If the iteration cycles, ask
        a solver for a fixpoint, letting atoms the labels leave open vary and
        requiring every label formula to hold; the answer is confirmed
        numerically.
        """
        self._reset()
        for _ in range(max_rounds):
            new = self._declared_union()
            if self.assignment is not None and self._same_assignment(new):
                self.settled_by = "iteration"
                return True
            self.assignment = new
            self._reset()
        return self._search_assignment()

    def _declared_union(self) -> Dict[str, np.ndarray]:
        out = {}
        for agent, rows in self.declared.items():
            stack = np.zeros((self.n, self.n, self.n), dtype=bool)
            for w, progs in enumerate(rows):
                for p in progs:
                    stack[w] |= self.relation(p)
            out[agent] = stack
        return out

    def _same_assignment(self, other: Dict[str, np.ndarray]) -> bool:
        return all(np.array_equal(other[a], self.assignment[a]) for a in other)

    def _search_assignment(self) -> bool:
        labels = self.labels or [frozenset()] * self.n
        atoms: Dict[str, List[Optional[bool]]] = {}
        for w, label in enumerate(labels):
            for f in label:
                if isinstance(f, Atom):
                    atoms.setdefault(f.name, [None] * self.n)[w] = True
                elif isinstance(f, Not) and isinstance(f.body, Atom):
                    atoms.setdefault(f.body.name, [None] * self.n)[w] = False
        if self.labels is None:
            atoms = {p: v.tolist() for p, v in self.valuation.items()}
        if self._solve_for_assignment(labels, atoms, self.declared):
            self.settled_by = "search"
            return True
        # the labels may leave capabilities open that an assignment needs
        # settled; let every capability in their closure declare itself
        if self.labels is not None and self._solve_for_assignment(labels, atoms, None):
            self.settled_by = "open-search"
            return True
        return False

    def _solve_for_assignment(self, labels, atoms, declared) -> bool:
        import z3
        from .symbolic import SymbolicModel
        universe: Set[Formula] = set()
        if declared is None:
            for label in labels:
                for f in label:
                    universe |= closure(f)
        sym = SymbolicModel(
            self.n, universe, atoms=atoms,
            atomic={a: r.tolist() for a, r in self.atomic.items()},
            omega=self.omega_rel.tolist(),
            declared_at=declared)
        for w, label in enumerate(labels):
            for f in sorted_terms(label):
                sym.solver.add(sym.sat(f)[w])
        sym.tie_assignment()
        if sym.solver.check() != z3.sat:
            return False
        model = sym.solver.model()
        self.valuation = {p: np.array(v, dtype=bool) for p, v in sym.atom_values(model).items()}
        self.assignment = {a: np.array(v, dtype=bool)
                           for a, v in sym.assignment_values(model).items()}
        if declared is None:
            self.declared = {
                agent: [frozenset(p for p in progs if sym.value(model, sym.capability(agent, p)[w]))
                        for w in range(self.n)]
                for agent, progs in sym.declared.items()}
        self._reset()
        return self._same_assignment(self._declared_union())

    def relation(self, prog: Program) -> np.ndarray:
        hit = self._rel.get(prog)
        if hit is not None:
            return hit
        n = self.n
        if isinstance(prog, AtomicProg):
            out = self.atomic.get(prog.name, np.zeros((n, n), dtype=bool))
        elif prog is OMEGA:
            out = self.omega_rel
        elif isinstance(prog, Arrow):
            # (~pre ; omega) + (omega ; post)
            pre = ~self.extension(prog.pre)
            post = self.extension(prog.post)
            out = (pre[:, None] & self.omega_rel) | (self.omega_rel & post[None, :])
        elif isinstance(prog, Test):
            out = np.diag(self.extension(prog.cond))
        elif isinstance(prog, Seq):
            out = _compose(self.relation(prog.first), self.relation(prog.second))
        elif isinstance(prog, Choice):
            out = self.relation(prog.left) | self.relation(prog.right)
        elif isinstance(prog, Star):
            out = reflexive_transitive_closure(self.relation(prog.body))
        else:
            raise TypeError(f"not a program: {prog!r}")
        self._rel[prog] = out
        return out

    def box(self, prog: Program, body: np.ndarray) -> np.ndarray:
        return ~(self.relation(prog) & ~body[None, :]).any(axis=1)

    def capability_relation(self, agent: str, w: int) -> np.ndarray:
        """The transitions agent may perform at state index w."""
        if self.assignment is None or agent not in self.assignment:
            return np.zeros((self.n, self.n), dtype=bool)
        return self.assignment[agent][w]

    def _capability(self, agent: str, prog: Program) -> np.ndarray:
        if isinstance(prog, Test):
            return np.ones(self.n, dtype=bool)
        if isinstance(prog, Seq):
            return (self._capability(agent, prog.first)
                    & self.box(prog.first, self._capability(agent, prog.second)))
        if isinstance(prog, Choice):
            return self._capability(agent, prog.left) & self._capability(agent, prog.right)
        if isinstance(prog, Star):
            return self.box(prog, self._capability(agent, prog.body))
        if self.assignment is None:
            # first round: trust the labels
            rows = self.declared.get(agent)
            return np.array([rows is not None and prog in rows[w] for w in range(self.n)],
                            dtype=bool)
        rel = self.relation(prog)
        return np.array([not (rel & ~self.capability_relation(agent, w)).any()
                         for w in range(self.n)], dtype=bool)

    def extension(self, f: Formula) -> np.ndarray:
        """Boolean vector of the states satisfying f."""
        hit = self._sat.get(f)
        if hit is not None:
            return hit
        if isinstance(f, Atom):
            out = self.valuation.get(f.name, np.zeros(self.n, dtype=bool))
        elif isinstance(f, Top):
            out = np.ones(self.n, dtype=bool)
        elif isinstance(f, Bottom):
            out = np.zeros(self.n, dtype=bool)
        elif isinstance(f, Not):
            out = ~self.extension(f.body)
        elif isinstance(f, Box):
            out = self.box(f.prog, self.extension(f.body))
        elif isinstance(f, Cap):
            out = self._capability(f.agent, f.prog)
        else:
            raise TypeError(f"not a formula: {f!r}")
        self._sat[f] = out
        return out

    def holds(self, state_id: int, f: Formula) -> bool:
        if state_id not in self.index:
            raise UnknownState(state_id)
        return bool(self.extension(f)[self.index[state_id]])

    def to_dict(self) -> dict:
        ids = self.state_ids
        return {
            "states": ids,
            "capabilities_settled": self.converged,
            "settled_by": self.settled_by,
            "atomic": {a: [[ids[i], ids[j]] for i, j in zip(*np.nonzero(r))]
                       for a, r in sorted(self.atomic.items())},
            "omega": [[ids[i], ids[j]] for i, j in zip(*np.nonzero(self.omega_rel))],
            "valuation": {p: [ids[i] for i in np.nonzero(v)[0]]
                          for p, v in sorted(self.valuation.items())},
        }


def build_model(h: HintikkaStructure, check: bool = True) -> Model:
    if check:
        report = check_hintikka(h)
        if not report.ok:
            raise InvalidStructure(f"not a Hintikka structure: {report.first_failure()}")
    ids = h.states
    index = {s: i for i, s in enumerate(ids)}
    n = len(ids)
    atomic: Dict[str, np.ndarray] = {}
    step_union = np.zeros((n, n), dtype=bool)
    for (s, prog), targets in h.trans.items():
        for d in targets:
            step_union[index[s], index[d]] = True
            if isinstance(prog, AtomicProg):
                rel = atomic.setdefault(prog.name, np.zeros((n, n), dtype=bool))
                rel[index[s], index[d]] = True
    valuation: Dict[str, np.ndarray] = {}
    declared: Dict[str, List[FrozenSet[Program]]] = {}
    for s in ids:
        for f in h.labels[s]:
            if isinstance(f, Atom):
                valuation.setdefault(f.name, np.zeros(n, dtype=bool))[index[s]] = True
            elif isinstance(f, Cap) and is_basic_process(f.prog):
                declared.setdefault(f.agent, [frozenset()] * n)
    for agent, rows in declared.items():
        for s in ids:
            rows[index[s]] = frozenset(f.prog for f in h.labels[s] if isinstance(f, Cap)
                                       and f.agent == agent and is_basic_process(f.prog))
    return Model(ids, atomic, step_union, valuation, declared,
                 labels=[h.labels[s] for s in ids])


def model_check(m: Model, state_id: int, f: Formula) -> bool:
    return m.holds(state_id, f)


# -- end-to-end ----------------------------------------------------------

@dataclass
class WitnessCheck:
    structure: Optional[HintikkaStructure]
    report: Optional[HintikkaReport]
    state: Optional[int]
    root_results: Dict[Formula, bool]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return (self.error is None and self.report is not None and self.report.ok
                and self.state is not None and bool(self.root_results)
                and all(self.root_results.values()))

    def describe(self) -> str:
        if self.error:
            return self.error
        if not self.report.ok:
            return f"hintikka check failed: {self.report.first_failure()}"
        if self.state is None:
            return "no state carries every root formula"
        bad = [to_text(f) for f, v in self.root_results.items() if not v]
        return "model check refuted: " + ", ".join(bad) if bad else "ok"


def verify_tableau(t: Tableau, roots: Iterable[Formula]) -> WitnessCheck:
    """Extract, check and model-check a sat tableau against its root formulas."""
    roots = frozenset(roots)
    try:
        h = extract_hintikka(t)
    except (RootNotSatisfiable, AssertionError) as exc:
        return WitnessCheck(None, None, None, {}, str(exc))
    report = check_hintikka(h)
    if not report.ok:
        return WitnessCheck(h, report, None, {})
    candidates = [s for s in h.roots if roots <= h.labels[s]] or h.states_containing(roots)
    if not candidates:
        return WitnessCheck(h, report, None, {})
    state = candidates[0]
    model = build_model(h, check=False)
    if not model.converged:
        return WitnessCheck(h, report, state, {}, "capability assignment did not settle")
    results = {f: model.holds(state, f) for f in sorted_terms(roots)}
    return WitnessCheck(h, report, state, results)
