"""Tableau construction with global caching, dependency tracking and
or-branch short-circuiting."""
from __future__ import annotations

import heapq
import sys
import threading
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Set

from .parser import to_text
from .reduction import reduction_degree, reduction_sets
from .syntax import (
    BOTTOM, OMEGA, TOP, AtomicProg, Box, Cap, Formula, Not, Test, arrow_capabilities,
    capability_witness, is_alpha_beta, is_basic_process, is_diamond_over_basic,
    is_eventuality, sorted_terms, term_key, with_omega_companions,
)
from .tableau import (
    BACKWARD, CYCLIC, FORWARD, SAT, TEMPSAT, UNSAT, Node, Tableau, cache_key, initial_flags,
    partition, reach,
)


class ResourceLimitExceeded(RuntimeError):
    pass


class InvariantViolation(AssertionError):
    pass


@dataclass
class Config:
    max_nodes: Optional[int] = None
    time_limit: Optional[float] = None
    trace: bool = False
    check_invariants: bool = False


@dataclass
class Stats:
    nodes_created: int = 0
    cache_hits: int = 0
    static_rules: int = 0
    transitional_rules: int = 0
    capability_rules: int = 0
    fulfillment_size: int = 0
    elapsed_seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Verdict:
    answer: str  # "SAT" or "UNSAT"
    tableau: Tableau
    stats: Stats
    root_formulas: frozenset
    trace: List[dict] = field(default_factory=list)

    @property
    def satisfiable(self) -> bool:
        return self.answer == "SAT"


def is_contradictory(phi) -> bool:
    if BOTTOM in phi or Not(TOP) in phi:
        return True
    for f in phi:
        if isinstance(f, Not):
            if f.body in phi:
                return True
            if isinstance(f.body, Cap) and isinstance(f.body.prog, Test):
                return True
    return False


def is_negated_process_capability(f: Formula) -> bool:
    return isinstance(f, Not) and isinstance(f.body, Cap) and is_basic_process(f.body.prog)


class _Solver:
    def __init__(self, config: Config):
        self.config = config
        self.tableau = Tableau()
        self.cache: Dict[object, int] = {}
        self.dependents: Dict[int, Set[int]] = defaultdict(set)
        self.stats = Stats()
        self.trace: List[dict] = []
        self.started = time.monotonic()

    # -- bookkeeping
    def emit(self, event: str, **data) -> None:
        if self.config.trace:
            data["event"] = event
            self.trace.append(data)

    def check_budget(self) -> None:
        cfg = self.config
        if cfg.max_nodes is not None and len(self.tableau) >= cfg.max_nodes:
            raise ResourceLimitExceeded(f"node limit of {cfg.max_nodes} reached")
        if cfg.time_limit is not None and time.monotonic() - self.started > cfg.time_limit:
            raise ResourceLimitExceeded(f"time limit of {cfg.time_limit}s reached")

    def node(self, v: int) -> Node:
        return self.tableau.nodes[v]

    def set_status(self, v: int, status: str, deps: Set[int]) -> None:
        node = self.node(v)
        if node.status in (SAT, UNSAT):
            raise InvariantViolation(f"final status of node {v} rewritten")
        if status in (SAT, UNSAT) and deps:
            raise InvariantViolation(f"node {v} gets status {status} with dependencies")
        if status == TEMPSAT and not deps:
            raise InvariantViolation(f"node {v} is tempsat without dependencies")
        if self.config.check_invariants:
            ancestors = set(self.tableau.forward_ancestors(v))
            if not set(deps) <= ancestors:
                raise InvariantViolation(
                    f"dependencies {sorted(deps)} of node {v} are not forward ancestors")
        for d in node.deps or ():
            self.dependents[d].discard(v)
        node.deps = set(deps)
        node.status = status
        for d in node.deps:
            self.dependents[d].add(v)
        self.emit("DepsSet", node=v, deps=sorted(node.deps))
        self.emit("StatusSet", node=v, status=status)

    def add_edge(self, src: int, dst: int, kind: str, tag: Optional[Formula]) -> None:
        self.tableau.add_edge(src, dst, kind, tag)
        if self.config.trace:
            self.emit("EdgeAdded", src=src, dst=dst, kind=kind,
                      tag=to_text(tag) if tag is not None else None)

    def relate(self, v: int, f: Formula, w: int, g: Formula) -> None:
        if self.tableau.relate((v, f), (w, g)):
            self.stats.fulfillment_size = self.tableau.fulfillment_size
            if self.config.trace:
                self.emit("FulfillEdge", src=[v, to_text(f)], dst=[w, to_text(g)])

    # -- the procedures
    def construct(self, parent: Optional[int], tag: Optional[Formula], phi, rd) -> None:
        active, reduced = partition(phi, rd)
        key = cache_key(active, reduced)
        hit = self.cache.get(key)
        if hit is not None:
            self.stats.cache_hits += 1
            cyclic = self.tableau.is_forward_ancestor(hit, parent, reflexive=True)
            self.add_edge(parent, hit, CYCLIC if cyclic else BACKWARD, tag)
            cached = self.node(hit)
            if reduced != cached.reduced:
                self.merge_reduced(cached, reduced)
            return

        self.check_budget()
        node = self.tableau.add_node(phi, rd)
        v = node.index
        self.cache[key] = v
        self.stats.nodes_created += 1
        if self.config.trace:
            self.emit("NodeCreated", node=v, partial=node.partial,
                      phi=[to_text(f) for f in sorted_terms(phi)])
        if parent is not None:
            self.add_edge(parent, v, FORWARD, tag)

        if is_contradictory(phi):
            self.set_status(v, UNSAT, set())
        elif node.partial:
            self.apply_static_rule(v)
            self.calc_status_partial(v)
        else:
            self.apply_non_static_rules(v)
            self.calc_status_state(v)
        if self.tableau.has_cyclic_parent(v):
            self.update_dependent_nodes(v)

    def merge_reduced(self, node: Node, reduced) -> None:
        phi = node.phi | reduced
        rd = dict(node.rd)
        for f in phi:
            if is_eventuality(f) and is_alpha_beta(f):
                rd[f] = 1
        active, new_reduced = partition(phi, rd)
        if active != node.active:
            raise InvariantViolation(f"merging reduced formulas changed node {node.index}")
        node.phi, node.rd, node.reduced = phi, rd, new_reduced

    def apply_static_rule(self, v: int) -> None:
        node = self.node(v)
        candidates = [f for f in node.active if is_alpha_beta(f)]
        principal = min(candidates, key=lambda f: (reduction_degree(f), term_key(f)))
        sets = reduction_sets(principal)
        self.stats.static_rules += 1
        if self.config.trace:
            self.emit("RuleApplied", rule="static", node=v, principal=to_text(principal),
                      degree=len(sets))
        for r in sets:
            if any(self.node(c).status == SAT for c in self.tableau.child_indices(v)):
                break
            phi = with_omega_companions(node.phi | r)
            rd = {}
            for f in phi:
                if is_eventuality(f) and is_alpha_beta(f):
                    if f is principal:
                        rd[f] = 1
                    elif f in node.phi:
                        rd[f] = node.rd.get(f, 0)
                    else:
                        rd[f] = 0
            self.construct(v, None, phi, rd)

    def apply_non_static_rules(self, v: int) -> None:
        node = self.node(v)
        diamonds = sorted_terms(f for f in node.phi if is_diamond_over_basic(f))
        refusals = sorted_terms(f for f in node.phi if is_negated_process_capability(f))
        omega_bodies = {f.body for f in node.active if isinstance(f, Box) and f.prog is OMEGA}
        for f in diamonds + refusals:
            if any(self.node(c).status == UNSAT for c in self.tableau.child_indices(v)):
                break
            if is_diamond_over_basic(f):
                prog, chi = f.body.prog, f.body.body
                child = {Not(chi)} | omega_bodies
                if isinstance(prog, AtomicProg):
                    child |= {g.body for g in node.active if isinstance(g, Box) and g.prog is prog}
                self.stats.transitional_rules += 1
                rule = "transitional"
            else:
                cap = f.body
                gamma = arrow_capabilities(node.phi, cap.agent)
                pres, witness = capability_witness(cap.prog, gamma)
                child = set(pres) | {witness}
                self.stats.capability_rules += 1
                rule = "capability"
            if self.config.trace:
                self.emit("RuleApplied", rule=rule, node=v, principal=to_text(f))
            phi = with_omega_companions(child)
            self.construct(v, f, phi, initial_flags(phi))

    def _dependency_union(self, v: int, children: Iterable[int]) -> Set[int]:
        deps: Set[int] = set()
        for c in children:
            cn = self.node(c)
            deps |= cn.deps if cn.status is not None else {c}
        deps.discard(v)
        return deps

    def _finish(self, v: int, deps: Set[int]) -> None:
        t = self.tableau
        if any(t.is_unfulfilled(v, f) for f in self.node(v).active_eventualities()):
            self.set_status(v, UNSAT, set())
        elif not deps:
            self.set_status(v, SAT, set())
        else:
            self.set_status(v, TEMPSAT, deps)

    def calc_status_partial(self, v: int) -> None:
        node = self.node(v)
        children = self.tableau.child_indices(v)
        chosen = [c for c in children if self.node(c).status == SAT]
        if not chosen:
            chosen = [c for c in children if self.node(c).status in (None, TEMPSAT)]
        for c in chosen:
            if self.node(c).status is None and not any(
                    d == c and k == CYCLIC for d, k, _ in node.children):
                raise InvariantViolation(f"child {c} of {v} has no status and is not cyclic")
        if not chosen:
            self.set_status(v, UNSAT, set())
            return
        deps = self._dependency_union(v, chosen)
        for f in node.active_eventualities():
            for c in chosen:
                cn = self.node(c)
                for g in sorted_terms(reach(f, cn.phi, cn.active)):
                    self.relate(v, f, c, g)
        self._finish(v, deps)

    def calc_status_state(self, v: int) -> None:
        node = self.node(v)
        children = self.tableau.child_indices(v)
        if any(self.node(c).status == UNSAT for c in children):
            self.set_status(v, UNSAT, set())
            return
        deps = self._dependency_union(v, children)
        for f in node.active_eventualities():
            target = next((d for d, _, tag in node.children if tag is f), None)
            if target is None:
                raise InvariantViolation(f"state {v} has no child for {to_text(f)}")
            self.relate(v, f, target, Not(f.body.body))
        self._finish(v, deps)

    def update_dependent_nodes(self, v: int) -> None:
        t = self.tableau
        node = self.node(v)
        if node.status in (SAT, UNSAT):
            self.propagate(v, v)
        while True:
            found = None
            for u in sorted(self.dependents[v]):
                un = self.node(u)
                if un.status == TEMPSAT and any(
                        t.is_unfulfilled(u, f) for f in un.active_eventualities()):
                    found = u
                    break
            if found is None:
                break
            self.set_status(found, UNSAT, set())
            self.propagate(v, found)
        while True:
            pending = sorted(u for u in self.dependents[v] if self.node(u).status == TEMPSAT)
            if not pending:
                break
            u = pending[0]
            deps = (self.node(u).deps - {v}) | (node.deps or set())
            if not deps:
                self.set_status(u, SAT, set())
                self.propagate(v, u)
            else:
                self.set_status(u, TEMPSAT, deps)

    def propagate(self, origin: int, start: int) -> None:
        t = self.tableau
        todo = [start]
        queued = {start}
        while todo:
            u = heapq.heappop(todo)
            queued.discard(u)
            status = self.node(u).status
            for p in t.parent_indices(u):
                pn = self.node(p)
                if pn.status != TEMPSAT or origin not in pn.deps:
                    continue
                kids = t.child_indices(p)
                if status == SAT and (pn.partial or all(
                        self.node(c).status == SAT for c in kids)):
                    self.set_status(p, SAT, set())
                elif status == UNSAT and (pn.is_state or all(
                        self.node(c).status == UNSAT for c in kids)):
                    self.set_status(p, UNSAT, set())
                else:
                    continue
                if p not in queued:
                    queued.add(p)
                    heapq.heappush(todo, p)


def _run_deep(fn):
    """Run fn on a thread with a large stack; the construction recurses per tree level."""
    box = {}

    def target():
        try:
            box["value"] = fn()
        except BaseException as exc:  # re-raised in the caller
            box["error"] = exc

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 1_000_000))
    old_size = threading.stack_size(512 * 1024 * 1024)
    try:
        worker = threading.Thread(target=target, name="tableau")
        worker.start()
        worker.join()
    finally:
        threading.stack_size(old_size)
        sys.setrecursionlimit(old_limit)
    if "error" in box:
        raise box["error"]
    return box["value"]


def solve(formulas: Iterable[Formula], config: Optional[Config] = None) -> Verdict:
    """Decide whether the conjunction of `formulas` is satisfiable."""
    config = config or Config()
    roots = frozenset(formulas)
    if not roots:
        raise ValueError("solve needs at least one formula")
    solver = _Solver(config)

    def build():
        phi = with_omega_companions(roots)
        solver.construct(None, None, phi, initial_flags(phi))

    _run_deep(build)
    solver.stats.elapsed_seconds = time.monotonic() - solver.started
    root = solver.tableau.nodes[solver.tableau.root]
    answer = "SAT" if root.status == SAT else "UNSAT"
    return Verdict(answer, solver.tableau, solver.stats, roots, solver.trace)


def is_satisfiable(formulas: Iterable[Formula], config: Optional[Config] = None) -> bool:
    return solve(formulas, config).satisfiable
