"""Abstract syntax of Type PDL: formulas, programs and their static analyses.

Terms are hash-consed: constructing a term that already exists returns the
stored instance, so equality is identity and hashing is O(1).
"""
from __future__ import annotations

import threading
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional


class Term:
    __slots__ = ("_args", "_hash", "_size", "_text", "__weakref__")

    _store: dict = {}
    _lock = threading.Lock()

    def __new__(cls, *args):
        key = (cls, args)
        term = Term._store.get(key)
        if term is not None:
            return term
        with Term._lock:
            term = Term._store.get(key)
            if term is None:
                term = object.__new__(cls)
                term._args = args
                term._hash = hash(key)
                term._size = None
                term._text = None
                Term._store[key] = term
        return term

    def __hash__(self):
        return self._hash

    def __reduce__(self):
        return (type(self), self._args)

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __str__(self):
        from .parser import to_text
        return to_text(self)

    def __repr__(self):
        return f"{type(self).__name__}{self._args!r}"


class Formula(Term):
    __slots__ = ()


class Program(Term):
    __slots__ = ()


class Atom(Formula):
    __slots__ = ()

    def __new__(cls, name: str):
        return super().__new__(cls, name)

    @property
    def name(self) -> str:
        return self._args[0]


class Top(Formula):
    __slots__ = ()

    def __new__(cls):
        return super().__new__(cls)


class Bottom(Formula):
    __slots__ = ()

    def __new__(cls):
        return super().__new__(cls)


class Not(Formula):
    __slots__ = ()

    def __new__(cls, body: Formula):
        if not isinstance(body, Formula):
            raise TypeError(f"Not expects a formula, got {body!r}")
        return super().__new__(cls, body)

    @property
    def body(self) -> Formula:
        return self._args[0]


class Box(Formula):
    """Universal modality over a program: every run of `prog` ends in `body`."""
    __slots__ = ()

    def __new__(cls, prog: Program, body: Formula):
        if not isinstance(prog, Program) or not isinstance(body, Formula):
            raise TypeError(f"Box expects (program, formula), got {prog!r}, {body!r}")
        return super().__new__(cls, prog, body)

    @property
    def prog(self) -> Program:
        return self._args[0]

    @property
    def body(self) -> Formula:
        return self._args[1]


class Cap(Formula):
    """Capability statement: `agent` can execute any transition of `prog`."""
    __slots__ = ()

    def __new__(cls, agent: str, prog: Program):
        if not isinstance(agent, str) or not isinstance(prog, Program):
            raise TypeError(f"Cap expects (agent name, program), got {agent!r}, {prog!r}")
        return super().__new__(cls, agent, prog)

    @property
    def agent(self) -> str:
        return self._args[0]

    @property
    def prog(self) -> Program:
        return self._args[1]


class AtomicProg(Program):
    __slots__ = ()

    def __new__(cls, name: str):
        return super().__new__(cls, name)

    @property
    def name(self) -> str:
        return self._args[0]


class Test(Program):
    __slots__ = ()

    def __new__(cls, cond: Formula):
        if not isinstance(cond, Formula):
            raise TypeError(f"Test expects a formula, got {cond!r}")
        return super().__new__(cls, cond)

    @property
    def cond(self) -> Formula:
        return self._args[0]


class Arrow(Program):
    """Precondition-effect process type pre => post."""
    __slots__ = ()

    def __new__(cls, pre: Formula, post: Formula):
        if not isinstance(pre, Formula) or not isinstance(post, Formula):
            raise TypeError(f"Arrow expects two formulas, got {pre!r}, {post!r}")
        return super().__new__(cls, pre, post)

    @property
    def pre(self) -> Formula:
        return self._args[0]

    @property
    def post(self) -> Formula:
        return self._args[1]


class Seq(Program):
    __slots__ = ()

    def __new__(cls, first: Program, second: Program):
        if not isinstance(first, Program) or not isinstance(second, Program):
            raise TypeError(f"Seq expects two programs, got {first!r}, {second!r}")
        return super().__new__(cls, first, second)

    @property
    def first(self) -> Program:
        return self._args[0]

    @property
    def second(self) -> Program:
        return self._args[1]


class Choice(Program):
    __slots__ = ()

    def __new__(cls, left: Program, right: Program):
        if not isinstance(left, Program) or not isinstance(right, Program):
            raise TypeError(f"Choice expects two programs, got {left!r}, {right!r}")
        return super().__new__(cls, left, right)

    @property
    def left(self) -> Program:
        return self._args[0]

    @property
    def right(self) -> Program:
        return self._args[1]


class Star(Program):
    __slots__ = ()

    def __new__(cls, body: Program):
        if not isinstance(body, Program):
            raise TypeError(f"Star expects a program, got {body!r}")
        return super().__new__(cls, body)

    @property
    def body(self) -> Program:
        return self._args[0]


TOP = Top()
BOTTOM = Bottom()
OMEGA = Arrow(TOP, TOP)
OMEGA_STAR = Star(OMEGA)


# -- derived connectives -------------------------------------------------

def conj(left: Formula, right: Formula) -> Formula:
    """left & right, encoded as a diamond over a test."""
    return Not(Box(Test(left), Not(right)))


def disj(left: Formula, right: Formula) -> Formula:
    return Box(Test(Not(left)), right)


def implies(left: Formula, right: Formula) -> Formula:
    return Box(Test(left), right)


def diamond(prog: Program, body: Formula) -> Formula:
    return Not(Box(prog, Not(body)))


def conj_all(formulas: Iterable[Formula]) -> Formula:
    items = list(formulas)
    if not items:
        return TOP
    out = items[0]
    for f in items[1:]:
        out = conj(out, f)
    return out


# -- program classes -----------------------------------------------------

def is_omega(prog: Term) -> bool:
    return prog is OMEGA


def is_atomic_or_omega(prog: Term) -> bool:
    return isinstance(prog, AtomicProg) or prog is OMEGA


def is_basic(prog: Term) -> bool:
    """Atomic programs, tests and precondition-effect processes."""
    return isinstance(prog, (AtomicProg, Test, Arrow))


def is_basic_process(prog: Term) -> bool:
    """Atomic programs and precondition-effect processes (no tests)."""
    return isinstance(prog, (AtomicProg, Arrow))


# -- size and canonical order --------------------------------------------

def size(term: Term) -> int:
    cached = term._size
    if cached is not None:
        return cached
    if isinstance(term, (Atom, Top, Bottom, AtomicProg)):
        n = 1
    elif isinstance(term, Not):
        n = 1 + size(term.body)
    elif isinstance(term, Box):
        n = 1 + size(term.prog) + size(term.body)
    elif isinstance(term, Cap):
        n = 1 + size(term.prog)
    elif isinstance(term, Test):
        n = 1 + size(term.cond)
    elif isinstance(term, Arrow):
        n = 1 + size(term.pre) + size(term.post)
    elif isinstance(term, Choice):
        n = 1 + size(term.left) + size(term.right)
    elif isinstance(term, Seq):
        n = 1 + 2 * size(term.first) + size(term.second)
    elif isinstance(term, Star):
        n = 1 + 2 * size(term.body)
    else:
        raise TypeError(f"not a term: {term!r}")
    term._size = n
    return n


def _sexpr(term: Term) -> str:
    cached = term._text
    if cached is not None:
        return cached
    if isinstance(term, (Atom, AtomicProg)):
        s = term.name
    elif isinstance(term, Top):
        s = "T"
    elif isinstance(term, Bottom):
        s = "F"
    elif isinstance(term, Not):
        s = "~" + _sexpr(term.body)
    elif isinstance(term, Box):
        s = "[" + _sexpr(term.prog) + "]" + _sexpr(term.body)
    elif isinstance(term, Cap):
        s = "C(" + term.agent + "," + _sexpr(term.prog) + ")"
    elif isinstance(term, Test):
        s = "?" + _sexpr(term.cond)
    elif isinstance(term, Arrow):
        s = "O" if term is OMEGA else "(" + _sexpr(term.pre) + "=>" + _sexpr(term.post) + ")"
    elif isinstance(term, Seq):
        s = "(" + _sexpr(term.first) + ";" + _sexpr(term.second) + ")"
    elif isinstance(term, Choice):
        s = "(" + _sexpr(term.left) + "+" + _sexpr(term.right) + ")"
    elif isinstance(term, Star):
        s = _sexpr(term.body) + "*"
    else:
        raise TypeError(f"not a term: {term!r}")
    term._text = s
    return s


def term_key(term: Term) -> tuple:
    """Total order on terms: by size, then by an unambiguous prefix rendering."""
    return (size(term), _sexpr(term))


def sorted_terms(terms: Iterable[Term]) -> list:
    return sorted(terms, key=term_key)


def set_key(formulas: Iterable[Formula]) -> tuple:
    return tuple(term_key(f) for f in sorted_terms(formulas))


# -- alpha/beta classification -------------------------------------------

class Classification(NamedTuple):
    kind: str  # "none", "alpha" or "beta"
    first: Optional[Formula] = None
    second: Optional[Formula] = None

    @property
    def is_alpha(self) -> bool:
        return self.kind == "alpha"

    @property
    def is_beta(self) -> bool:
        return self.kind == "beta"

    def components(self) -> tuple:
        return tuple(x for x in (self.first, self.second) if x is not None)


NOT_ALPHA_BETA = Classification("none")


def _alpha(first, second=None):
    return Classification("alpha", first, second)


def _beta(first, second):
    return Classification("beta", first, second)


@lru_cache(maxsize=None)
def classify(f: Formula) -> Classification:
    if isinstance(f, Box):
        prog, body = f.prog, f.body
        if isinstance(prog, Test):
            return _beta(Not(prog.cond), body)
        if isinstance(prog, Arrow) and prog is not OMEGA:
            return _beta(conj(prog.pre, Box(OMEGA_STAR, Box(Test(prog.post), body))),
                         Box(OMEGA_STAR, body))
        if isinstance(prog, Seq):
            return _alpha(Box(prog.first, Box(prog.second, body)))
        if isinstance(prog, Choice):
            return _alpha(Box(prog.left, body), Box(prog.right, body))
        if isinstance(prog, Star):
            return _alpha(body, Box(prog.body, f))
        return NOT_ALPHA_BETA
    if isinstance(f, Cap):
        prog, agent = f.prog, f.agent
        if isinstance(prog, Seq):
            return _alpha(Cap(agent, prog.first), Box(prog.first, Cap(agent, prog.second)))
        if isinstance(prog, Choice):
            return _alpha(Cap(agent, prog.left), Cap(agent, prog.right))
        if isinstance(prog, Star):
            return _alpha(Box(prog, Cap(agent, prog.body)))
        return NOT_ALPHA_BETA
    if isinstance(f, Not):
        inner = f.body
        if isinstance(inner, Not):
            return _alpha(inner.body)
        if isinstance(inner, Box):
            prog, body = inner.prog, inner.body
            if isinstance(prog, Test):
                return _alpha(Not(body), prog.cond)
            if isinstance(prog, Arrow) and prog is not OMEGA:
                return _beta(Not(Box(Test(Not(prog.pre)), Box(OMEGA, body))),
                             Not(Box(OMEGA, Box(Test(prog.post), body))))
            if isinstance(prog, Seq):
                return _alpha(Not(Box(prog.first, Box(prog.second, body))))
            if isinstance(prog, Choice):
                return _beta(Not(Box(prog.left, body)), Not(Box(prog.right, body)))
            if isinstance(prog, Star):
                return _beta(Not(body), Not(Box(prog.body, inner)))
            return NOT_ALPHA_BETA
        if isinstance(inner, Cap):
            prog, agent = inner.prog, inner.agent
            if isinstance(prog, Seq):
                return _beta(Not(Cap(agent, prog.first)),
                             Not(Box(prog.first, Cap(agent, prog.second))))
            if isinstance(prog, Choice):
                return _beta(Not(Cap(agent, prog.left)), Not(Cap(agent, prog.right)))
            if isinstance(prog, Star):
                return _alpha(Not(Box(prog, Cap(agent, prog.body))))
            return NOT_ALPHA_BETA
    return NOT_ALPHA_BETA


def is_alpha_beta(f: Formula) -> bool:
    return classify(f).kind != "none"


@lru_cache(maxsize=None)
def is_eventuality(f: Formula) -> bool:
    """True for formulas shaped ~[A1]...[Ak][B*]phi with k >= 0."""
    if not isinstance(f, Not):
        return False
    g = f.body
    while isinstance(g, Box):
        if isinstance(g.prog, Star):
            return True
        g = g.body
    return False


def eventuality_goal(f: Formula) -> Formula:
    """For ~[A1]...[An][B*]chi with ~chi not an eventuality, return ~chi."""
    if not is_eventuality(f):
        raise ValueError(f"not an eventuality: {f}")
    g, last = f.body, None
    while isinstance(g, Box):
        if isinstance(g.prog, Star):
            last = g.body
        g = g.body
    return Not(last)


def is_diamond_over_basic(f: Formula) -> bool:
    return isinstance(f, Not) and isinstance(f.body, Box) and is_atomic_or_omega(f.body.prog)


def is_box_over_basic(f: Formula) -> bool:
    return isinstance(f, Box) and is_atomic_or_omega(f.prog)


def omega_companion(f: Formula) -> Optional[Formula]:
    """For a box over omega return the starred box it implies by reflexivity.

    [omega][omega*]phi yields [omega*]phi; any other [omega]phi yields
    [omega*]phi. Returns None when f is not a box over omega.
    """
    if not (isinstance(f, Box) and f.prog is OMEGA):
        return None
    body = f.body
    if isinstance(body, Box) and body.prog is OMEGA_STAR:
        return body
    return Box(OMEGA_STAR, body)


def with_omega_companions(formulas: Iterable[Formula]) -> frozenset:
    out = set(formulas)
    for f in list(out):
        c = omega_companion(f)
        if c is not None:
            out.add(c)
    return frozenset(out)


# -- capability witnesses ------------------------------------------------

def arrow_capabilities(formulas: Iterable[Formula], agent: str) -> list:
    """All Cap(agent, pre => post) members, in canonical order."""
    caps = [f for f in formulas
            if isinstance(f, Cap) and f.agent == agent and isinstance(f.prog, Arrow)]
    return sorted_terms(caps)


def capability_witness(prog: Program, gamma: Iterable[Formula]) -> tuple:
    """Preconditions and the diamond a state needs to refute Cap(agent, prog).

    Returns (pre_1..pre_k, ~[prog][~post_1]...[~post_k]false) for the sorted
    capability statements in gamma.
    """
    caps = sorted_terms(gamma)
    tail: Formula = BOTTOM
    for c in reversed(caps):
        tail = Box(Test(Not(c.prog.post)), tail)
    return tuple(c.prog.pre for c in caps), Not(Box(prog, tail))


# -- closure and cpr sets ------------------------------------------------

class ClosureBudgetExceeded(RuntimeError):
    pass


class MalformedInput(ValueError):
    pass


def _closure_successors(f: Formula):
    from .reduction import reduction_sets
    if is_alpha_beta(f):
        for r in reduction_sets(f):
            yield from r
    if is_diamond_over_basic(f):
        yield Not(f.body.body)
    elif is_box_over_basic(f):
        yield f.body
        c = omega_companion(f)
        if c is not None:
            yield c
    elif isinstance(f, Not) and isinstance(f.body, Cap) and isinstance(f.body.prog, Arrow):
        yield Not(f.body.prog.pre)
        yield f.body.prog.post
    elif isinstance(f, Cap) and isinstance(f.prog, Arrow):
        yield f.prog.pre
        yield Not(f.prog.post)


def closure(f: Formula, cap: Optional[int] = None) -> frozenset:
    """Least superset of {f} closed under the decomposition and unboxing rules."""
    if cap is None:
        cap = 64 * size(f) ** 2
    seen = {f}
    todo = [f]
    while todo:
        g = todo.pop()
        for h in _closure_successors(g):
            if h not in seen:
                seen.add(h)
                if len(seen) > cap:
                    raise ClosureBudgetExceeded(
                        f"closure of a size-{size(f)} formula exceeds {cap} members")
                todo.append(h)
    return frozenset(seen)


def cpr_set(f: Formula, neg_cap: Formula, gamma: Iterable[Formula],
            check_membership: bool = True) -> frozenset:
    """Formulas the capability rule can introduce for neg_cap under gamma."""
    if not (isinstance(neg_cap, Not) and isinstance(neg_cap.body, Cap)
            and is_basic_process(neg_cap.body.prog)):
        raise MalformedInput(f"expected ~cap(i, A) with A atomic or an arrow: {neg_cap}")
    agent, prog = neg_cap.body.agent, neg_cap.body.prog
    gamma = sorted_terms(gamma)
    for c in gamma:
        if not (isinstance(c, Cap) and c.agent == agent and isinstance(c.prog, Arrow)):
            raise MalformedInput(f"expected cap({agent}, pre => post): {c}")
    if check_membership:
        cl = closure(f)
        missing = [g for g in [neg_cap, *gamma] if g not in cl]
        if missing:
            raise MalformedInput(f"not in the closure: {', '.join(map(str, missing))}")
    _, top = capability_witness(prog, gamma)
    out = {top}
    chain = top.body.body
    while isinstance(chain, Box):
        out.add(Not(chain))
        chain = chain.body
    out.add(Not(chain))
    if isinstance(prog, Arrow):
        out |= {
            Not(Box(Test(Not(prog.pre)), Box(OMEGA, chain_root(top)))),
            Not(Box(OMEGA, chain_root(top))),
            Not(Box(OMEGA, Box(Test(prog.post), chain_root(top)))),
            Not(Box(Test(prog.post), chain_root(top))),
        }
    return frozenset(out)


def chain_root(witness: Formula) -> Formula:
    """The box chain under the leading diamond of a capability witness."""
    return witness.body.body


def atoms_of(term: Term) -> set:
    out = set()
    _walk(term, lambda t: out.add(t) if isinstance(t, Atom) else None)
    return out


def programs_of(term: Term) -> set:
    out = set()
    _walk(term, lambda t: out.add(t) if isinstance(t, AtomicProg) else None)
    return out


def agents_of(term: Term) -> set:
    out = set()
    _walk(term, lambda t: out.add(t.agent) if isinstance(t, Cap) else None)
    return out


def _walk(term: Term, visit) -> None:
    stack, seen = [term], set()
    while stack:
        t = stack.pop()
        if t in seen:
            continue
        seen.add(t)
        visit(t)
        stack.extend(a for a in t._args if isinstance(a, Term))
