"""Post-hoc structural checks on a solved tableau and its trace."""
from graphlib import CycleError, TopologicalSorter

from tpdl.tableau import CYCLIC, SAT, UNSAT, cache_key


def unfinished_nodes(t):
    return [n.index for n in t.nodes if n.status not in (SAT, UNSAT) or n.deps]


def sat_child_failures(t):
    bad = []
    for n in t.nodes:
        if n.status != SAT:
            continue
        kids = [t.nodes[d].status for d, _, _ in n.children]
        if n.partial and SAT not in kids:
            bad.append(n.index)
        if not n.partial and any(s != SAT for s in kids):
            bad.append(n.index)
    return bad


def partial_cycle(t):
    """A cycle made only of partial nodes, or None."""
    graph = {n.index: [d for d, _, _ in n.children if t.nodes[d].partial]
             for n in t.nodes if n.partial}
    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError as exc:
        return exc.args[1]
    return None


def similar_pairs(t):
    seen = {}
    clashes = []
    for n in t.nodes:
        key = cache_key(n.active, n.reduced)
        if key in seen:
            clashes.append((seen[key], n.index))
        seen[key] = n.index
    return clashes


def _reaches_by_cyclic_edge(t, start, target):
    seen, todo = {start}, [start]
    while todo:
        u = todo.pop()
        for d, kind, _ in t.nodes[u].children:
            if kind == CYCLIC and d == target:
                return True
            if d not in seen:
                seen.add(d)
                todo.append(d)
    return False


def dependency_failures(t, trace):
    """Every dependency set ever written names forward ancestors closing a cycle."""
    bad = []
    for e in trace:
        if e["event"] != "DepsSet":
            continue
        v = e["node"]
        ancestors = set(t.forward_ancestors(v))
        for d in e["deps"]:
            if d not in ancestors or not _reaches_by_cyclic_edge(t, v, d):
                bad.append((v, d))
    return bad
