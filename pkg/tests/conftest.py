import sys
from pathlib import Path

from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from tpdl.syntax import (  # noqa: E402
    BOTTOM, OMEGA, TOP, Arrow, Atom, AtomicProg, Box, Cap, Choice, Not, Seq, Star,
)
from tpdl import syntax  # noqa: E402

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

atoms = st.sampled_from([Atom("p"), Atom("q"), Atom("r")])
atomic_progs = st.sampled_from([AtomicProg("a"), AtomicProg("b")])


def _programs(formulas):
    return st.recursive(
        st.one_of(atomic_progs, st.just(OMEGA)),
        lambda inner: st.one_of(
            st.builds(Seq, inner, inner),
            st.builds(Choice, inner, inner),
            st.builds(Star, inner),
            st.builds(syntax.Test, formulas),
            st.builds(Arrow, formulas, formulas),
        ),
        max_leaves=3,
    )


def _formulas():
    leaves = st.one_of(atoms, st.just(TOP), st.just(BOTTOM))

    def extend(inner):
        progs = _programs(inner)
        return st.one_of(
            st.builds(Not, inner),
            st.builds(Box, progs, inner),
            st.builds(Cap, st.sampled_from(["i", "j"]), progs),
        )

    return st.recursive(leaves, extend, max_leaves=4)


formulas = _formulas()
programs = _programs(formulas)
