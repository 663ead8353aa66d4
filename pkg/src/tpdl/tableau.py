"""Labels, nodes and the tableau graph together with the fulfillment relation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from .parser import to_text
from .reduction import fully_reduces_within, reduction_sets, reduction_steps
from .syntax import (
    Formula, classify, eventuality_goal, is_diamond_over_basic, is_eventuality, sorted_terms,
)

SAT, TEMPSAT, UNSAT = "sat", "tempsat", "unsat"
FORWARD, BACKWARD, CYCLIC = "forward", "backward", "cyclic"


class PreconditionError(ValueError):
    pass


# -- labels --------------------------------------------------------------

@dataclass(frozen=True)
class Label:
    phi: FrozenSet[Formula]
    rd: Mapping[Formula, int] = field(default_factory=dict)

    def flag(self, f: Formula) -> int:
        return self.rd.get(f, 0)


def initial_flags(phi: Iterable[Formula]) -> Dict[Formula, int]:
    return {f: 0 for f in phi if is_eventuality(f) and classify(f).kind != "none"}


def partition(phi: FrozenSet[Formula], rd: Mapping[Formula, int]):
    """Split phi into (active, reduced) formula sets."""
    active, reduced = [], []
    for f in phi:
        if classify(f).kind == "none":
            active.append(f)
        elif is_eventuality(f):
            (reduced if rd.get(f, 0) == 1 else active).append(f)
        elif any(r <= phi for r in reduction_sets(f)):
            reduced.append(f)
        else:
            active.append(f)
    return frozenset(active), frozenset(reduced)


def active_set(label: Label) -> FrozenSet[Formula]:
    return partition(label.phi, label.rd)[0]


def reduced_set(label: Label) -> FrozenSet[Formula]:
    return partition(label.phi, label.rd)[1]


def is_partial_active(active: Iterable[Formula]) -> bool:
    return any(classify(f).kind != "none" for f in active)


def is_partial(label: Label) -> bool:
    return is_partial_active(active_set(label))


def cache_key(active: FrozenSet[Formula], reduced: FrozenSet[Formula]):
    return (active, reduced if is_partial_active(active) else None)


def similar(l1: Label, l2: Label) -> bool:
    a1, r1 = partition(l1.phi, l1.rd)
    a2, r2 = partition(l2.phi, l2.rd)
    return cache_key(a1, r1) == cache_key(a2, r2)


def reach(f: Formula, phi: FrozenSet[Formula], active: FrozenSet[Formula]) -> Set[Formula]:
    """Formulas of phi reached from f through fully reduced eventualities."""
    if f not in phi or not is_eventuality(f):
        raise PreconditionError(f"reach needs an eventuality of the label: {f}")
    out, seen, todo = set(), {f}, [f]
    while todo:
        g = todo.pop()
        if not is_eventuality(g) or g in active:
            out.add(g)
            continue
        for _, h in reduction_steps(g):
            if h in phi and h not in seen and fully_reduces_within(g, h, phi):
                seen.add(h)
                todo.append(h)
    return out


def label_reach(f: Formula, label: Label) -> Set[Formula]:
    return reach(f, label.phi, active_set(label))


# -- nodes and graph -----------------------------------------------------

class Node:
    __slots__ = ("index", "phi", "rd", "active", "reduced", "partial", "deps", "status",
                 "children", "parents", "forward_parent")

    def __init__(self, index: int, phi: FrozenSet[Formula], rd: Dict[Formula, int]):
        self.index = index
        self.phi = phi
        self.rd = rd
        self.active, self.reduced = partition(phi, rd)
        self.partial = is_partial_active(self.active)
        self.deps: Optional[Set[int]] = None
        self.status: Optional[str] = None
        self.children: List[Tuple[int, str, Optional[Formula]]] = []
        self.parents: List[Tuple[int, str, Optional[Formula]]] = []
        self.forward_parent: Optional[int] = None

    @property
    def label(self) -> Label:
        return Label(self.phi, self.rd)

    @property
    def is_state(self) -> bool:
        return not self.partial

    def active_eventualities(self) -> List[Formula]:
        return sorted_terms(f for f in self.active if is_eventuality(f))

    def __repr__(self):
        kind = "partial" if self.partial else "state"
        return f"<node {self.index} {kind} {self.status}>"


class Tableau:
    def __init__(self):
        self.nodes: List[Node] = []
        self.root: Optional[int] = None
        self.fulfillment: Dict[Tuple[int, Formula], List[Tuple[int, Formula]]] = {}
        self.fulfillment_size = 0

    def __len__(self):
        return len(self.nodes)

    def node(self, index: int) -> Node:
        return self.nodes[index]

    def add_node(self, phi, rd) -> Node:
        node = Node(len(self.nodes), phi, rd)
        self.nodes.append(node)
        if self.root is None:
            self.root = node.index
        return node

    def add_edge(self, src: int, dst: int, kind: str, tag: Optional[Formula]) -> None:
        self.nodes[src].children.append((dst, kind, tag))
        self.nodes[dst].parents.append((src, kind, tag))
        if kind == FORWARD:
            self.nodes[dst].forward_parent = src

    def edges(self, kind: Optional[str] = None):
        for node in self.nodes:
            for dst, k, tag in node.children:
                if kind is None or k == kind:
                    yield node.index, dst, k, tag

    def child_indices(self, index: int) -> List[int]:
        seen, out = set(), []
        for dst, _, _ in self.nodes[index].children:
            if dst not in seen:
                seen.add(dst)
                out.append(dst)
        return out

    def parent_indices(self, index: int) -> List[int]:
        return sorted({src for src, _, _ in self.nodes[index].parents})

    def has_cyclic_parent(self, index: int) -> bool:
        return any(kind == CYCLIC for _, kind, _ in self.nodes[index].parents)

    def forward_ancestors(self, index: int) -> List[int]:
        """Strict forward ancestors, nearest first."""
        out = []
        cur = self.nodes[index].forward_parent
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].forward_parent
        return out

    def is_forward_ancestor(self, anc: int, index: int, reflexive: bool = False) -> bool:
        if reflexive and anc == index:
            return True
        cur = self.nodes[index].forward_parent
        while cur is not None:
            if cur == anc:
                return True
            cur = self.nodes[cur].forward_parent
        return False

    # -- fulfillment relation
    def relate(self, src: Tuple[int, Formula], dst: Tuple[int, Formula]) -> bool:
        targets = self.fulfillment.setdefault(src, [])
        if dst in targets:
            return False
        targets.append(dst)
        self.fulfillment_size += 1
        return True

    def fulfillment_pairs(self):
        for src, targets in self.fulfillment.items():
            for dst in targets:
                yield src, dst

    def _check_active_eventuality(self, v: int, f: Formula) -> None:
        node = self.nodes[v]
        if f not in node.active or not is_eventuality(f):
            raise PreconditionError(f"not an active eventuality of node {v}: {f}")

    def is_fulfilled(self, v: int, f: Formula) -> bool:
        self._check_active_eventuality(v, f)
        goal = eventuality_goal(f)
        seen = {(v, f)}
        todo = [(v, f)]
        while todo:
            pair = todo.pop()
            for w, h in self.fulfillment.get(pair, ()):
                if w != v and self.nodes[w].status not in (SAT, TEMPSAT):
                    continue
                if h is goal:
                    return True
                if is_eventuality(h) and (w, h) not in seen:
                    seen.add((w, h))
                    todo.append((w, h))
        return False

    def dependencies(self, v: int, f: Formula) -> Set[int]:
        """Nodes with undefined status on which the eventuality f of v depends."""
        self._check_active_eventuality(v, f)
        out = set()
        seen = {(v, f)}
        todo = [(v, f)]
        while todo:
            pair = todo.pop()
            for w, h in self.fulfillment.get(pair, ()):
                if not is_eventuality(h) or (w, h) in seen:
                    continue
                status = self.nodes[w].status
                if status is None and not self.fulfillment.get((w, h)):
                    out.add(w)
                if w == v or status == TEMPSAT:
                    seen.add((w, h))
                    todo.append((w, h))
        return out

    def is_unfulfilled(self, v: int, f: Formula) -> bool:
        return not self.is_fulfilled(v, f) and not self.dependencies(v, f)

    # -- export
    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "nodes": [{
                "id": n.index,
                "kind": "partial" if n.partial else "state",
                "status": n.status,
                "deps": sorted(n.deps) if n.deps is not None else None,
                "phi": [to_text(f) for f in sorted_terms(n.phi)],
                "active": [to_text(f) for f in sorted_terms(n.active)],
                "rd": {to_text(f): v for f, v in n.rd.items()},
            } for n in self.nodes],
            "edges": [{
                "from": s, "to": d, "kind": k, "tag": to_text(t) if t is not None else None,
            } for s, d, k, t in self.edges()],
            "fulfillment": [{
                "from": [s[0], to_text(s[1])], "to": [d[0], to_text(d[1])],
            } for s, d in self.fulfillment_pairs()],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def to_dot(self) -> str:
        colors = {SAT: "palegreen", TEMPSAT: "khaki", UNSAT: "lightcoral", None: "white"}
        lines = ["digraph tableau {", "  node [fontname=\"Helvetica\", fontsize=10];"]
        for n in self.nodes:
            text = "\\n".join(_dot_escape(to_text(f)) for f in sorted_terms(n.phi))
            shape = "box" if n.partial else "box, peripheries=2"
            lines.append(f'  v{n.index} [shape={shape}, style=filled, '
                         f'fillcolor={colors[n.status]}, label="v{n.index}: {n.status}\\n{text}"];')
        styles = {FORWARD: "solid", BACKWARD: "dashed", CYCLIC: "dotted"}
        for s, d, k, t in self.edges():
            label = f', label="{_dot_escape(to_text(t))}"' if t is not None else ""
            lines.append(f"  v{s} -> v{d} [style={styles[k]}{label}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def diamond_edge_tag_ok(tag: Formula) -> bool:
    from .syntax import Cap, Not, is_basic_process
    if is_diamond_over_basic(tag):
        return True
    return isinstance(tag, Not) and isinstance(tag.body, Cap) and is_basic_process(tag.body.prog)
