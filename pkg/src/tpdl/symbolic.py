"""Relational semantics over a fixed number of worlds, encoded for z3.

Every formula becomes a vector of booleans (one per world) and every program
a matrix; intermediate results are named by fresh variables so that the
constraint size stays linear in the number of subterms.  Each agent's
capability assignment is a free relation per world, tied to the union of
the capabilities that world declares.  Parts of the frame can be fixed to
constants, which turns the encoding into a search for the assignment alone.
"""
from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import z3

from .syntax import (
    OMEGA, Arrow, Atom, AtomicProg, Bottom, Box, Cap, Choice, Formula, Not, Program, Seq,
    Star, Test, Top, is_basic_process, programs_of, sorted_terms,
)

FALSE = z3.BoolVal(False)
TRUE = z3.BoolVal(True)


class SymbolicModel:
    def __init__(self, m: int, universe: Iterable[Formula],
                 atoms: Optional[Mapping[str, Sequence[bool]]] = None,
                 atomic: Optional[Mapping[str, Sequence[Sequence[bool]]]] = None,
                 omega: Optional[Sequence[Sequence[bool]]] = None,
                 declared_at: Optional[Mapping[str, Sequence[Iterable[Program]]]] = None):
        """With atoms/atomic/omega given, the valuation and relations are constants.

        A None entry in atoms (or an atom missing from it) is left free.

        declared_at[agent][w] lists the programs agent declares at w; without
        it a world declares exactly the capabilities true there.
        """
        universe = list(universe)
        self.m = m
        self.solver = z3.Solver()
        self.fresh = 0
        # constant frames collapse most subterms, so simplify as we go
        self.simplify = atomic is not None
        self.fixed_atoms = atoms
        self.atoms: Dict[str, List[z3.BoolRef]] = {}
        self.rel_memo: Dict[Program, list] = {}
        self.sat_memo: Dict[Formula, list] = {}
        self.atomic: Dict[str, List[List[z3.BoolRef]]] = {}
        if atomic is not None:
            for a, rel in atomic.items():
                self.atomic[a] = [[z3.BoolVal(bool(rel[w][v])) for v in range(m)]
                                  for w in range(m)]
        else:
            names = sorted({p.name for f in universe for p in programs_of(f)})
            for a in names:
                self.atomic[a] = [[z3.Bool(f"R_{a}_{w}_{v}") for v in range(m)]
                                  for w in range(m)]
        if omega is not None:
            self.omega = [[z3.BoolVal(bool(omega[w][v])) for v in range(m)] for w in range(m)]
        else:
            step = [[z3.Or([r[w][v] for r in self.atomic.values()]) if self.atomic else FALSE
                     for v in range(m)] for w in range(m)]
            self.omega = self.closure(step)
        self.declared_at = declared_at
        self.declared: Dict[str, List[Program]] = {}
        if declared_at is not None:
            for agent, rows in declared_at.items():
                self.declared[agent] = sorted_terms({p for row in rows for p in row})
        else:
            for f in sorted_terms(universe):
                if isinstance(f, Cap) and is_basic_process(f.prog):
                    self.declared.setdefault(f.agent, []).append(f.prog)
        # assignment[agent][w][u][v]: agent may perform u -> v at w
        self.assignment = {
            agent: [[[z3.Bool(f"I_{agent}_{w}_{u}_{v}") for v in range(m)] for u in range(m)]
                    for w in range(m)]
            for agent in self.declared}

    # -- helpers
    def define(self, expr) -> z3.BoolRef:
        if self.simplify:
            expr = z3.simplify(expr)
        if z3.is_true(expr) or z3.is_false(expr):
            return expr
        self.fresh += 1
        b = z3.Bool(f"d{self.fresh}")
        self.solver.add(b == expr)
        return b

    def compose(self, x, y):
        m = self.m
        return [[self.define(z3.Or([z3.And(x[w][u], y[u][v]) for u in range(m)]))
                 for v in range(m)] for w in range(m)]

    def closure(self, rel):
        m = self.m
        out = [[TRUE if w == v else self.define(rel[w][v]) for v in range(m)] for w in range(m)]
        steps = 1
        while steps < m:
            out = self.compose(out, out)
            steps *= 2
        return out

    def tie_assignment(self) -> None:
        """Each world's assignment is the union of the capabilities it declares."""
        m = self.m
        for agent, progs in self.declared.items():
            if self.declared_at is not None:
                rows = self.declared_at[agent]
                flags = [(self.rel(p), [TRUE if p in rows[w] else FALSE for w in range(m)])
                         for p in progs]
            else:
                flags = [(self.rel(p), self.capability(agent, p)) for p in progs]
            grid = self.assignment[agent]
            for w in range(m):
                for u in range(m):
                    for v in range(m):
                        self.solver.add(grid[w][u][v] == z3.Or(
                            [z3.And(held[w], r[u][v]) for r, held in flags]))

    # -- semantics
    def rel(self, prog: Program):
        hit = self.rel_memo.get(prog)
        if hit is not None:
            return hit
        m = self.m
        if isinstance(prog, AtomicProg):
            out = self.atomic.get(prog.name) or [[FALSE] * m for _ in range(m)]
        elif prog is OMEGA:
            out = self.omega
        elif isinstance(prog, Arrow):
            pre, post = self.sat(prog.pre), self.sat(prog.post)
            out = [[self.define(z3.And(self.omega[w][v], z3.Or(z3.Not(pre[w]), post[v])))
                    for v in range(m)] for w in range(m)]
        elif isinstance(prog, Test):
            cond = self.sat(prog.cond)
            out = [[cond[w] if w == v else FALSE for v in range(m)] for w in range(m)]
        elif isinstance(prog, Seq):
            out = self.compose(self.rel(prog.first), self.rel(prog.second))
        elif isinstance(prog, Choice):
            a, b = self.rel(prog.left), self.rel(prog.right)
            out = [[self.define(z3.Or(a[w][v], b[w][v])) for v in range(m)] for w in range(m)]
        elif isinstance(prog, Star):
            out = self.closure(self.rel(prog.body))
        else:
            raise TypeError(f"not a program: {prog!r}")
        self.rel_memo[prog] = out
        return out

    def box(self, prog: Program, body):
        r = self.rel(prog)
        return [self.define(z3.And([z3.Implies(r[w][v], body[v]) for v in range(self.m)]))
                for w in range(self.m)]

    def capability(self, agent: str, prog: Program):
        m = self.m
        if isinstance(prog, Test):
            return [TRUE] * m
        if isinstance(prog, Seq):
            first = self.capability(agent, prog.first)
            rest = self.box(prog.first, self.capability(agent, prog.second))
            return [self.define(z3.And(first[w], rest[w])) for w in range(m)]
        if isinstance(prog, Choice):
            a, b = self.capability(agent, prog.left), self.capability(agent, prog.right)
            return [self.define(z3.And(a[w], b[w])) for w in range(m)]
        if isinstance(prog, Star):
            return self.box(prog, self.capability(agent, prog.body))
        key = Cap(agent, prog)
        hit = self.sat_memo.get(key)
        if hit is not None:
            return hit
        r = self.rel(prog)
        grid = self.assignment.get(agent)
        out = []
        for w in range(m):
            out.append(self.define(z3.And([
                z3.Implies(r[u][v], grid[w][u][v] if grid else FALSE)
                for u in range(m) for v in range(m)])))
        self.sat_memo[key] = out
        return out

    def sat(self, f: Formula):
        hit = self.sat_memo.get(f)
        if hit is not None:
            return hit
        m = self.m
        if isinstance(f, Atom):
            fixed = (self.fixed_atoms or {}).get(f.name) or [None] * m
            out = [z3.Bool(f"P_{f.name}_{w}") if fixed[w] is None else z3.BoolVal(bool(fixed[w]))
                   for w in range(m)]
            self.atoms[f.name] = out
        elif isinstance(f, Top):
            out = [TRUE] * m
        elif isinstance(f, Bottom):
            out = [FALSE] * m
        elif isinstance(f, Not):
            out = [self.define(z3.Not(x)) for x in self.sat(f.body)]
        elif isinstance(f, Box):
            out = self.box(f.prog, self.sat(f.body))
        elif isinstance(f, Cap):
            out = self.capability(f.agent, f.prog)
        else:
            raise TypeError(f"not a formula: {f!r}")
        self.sat_memo[f] = out
        return out

    # -- reading a solution
    def value(self, model, x) -> bool:
        return z3.is_true(model.eval(x, model_completion=True))

    def atom_values(self, model) -> Dict[str, List[bool]]:
        return {name: [self.value(model, x) for x in vec] for name, vec in self.atoms.items()}

    def assignment_values(self, model) -> Dict[str, List[List[List[bool]]]]:
        m = self.m
        return {agent: [[[self.value(model, grid[w][u][v]) for v in range(m)]
                         for u in range(m)] for w in range(m)]
                for agent, grid in self.assignment.items()}
