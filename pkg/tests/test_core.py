from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mc, mcs
from mcsterm.core import (
    BOTTOM_KEY,
    Atom,
    Invariant,
    Mcs,
    MonotonicityConstraint,
    UsageError,
    VarNode,
    canonical_key,
    close,
    collapse,
    compose,
    entails,
    is_satisfiable,
    multipath_graph,
    reindex,
    sample_solution,
)
from mcsterm.oracle import _join


def atoms_strategy(n: int, primed: bool = True):
    node = st.builds(VarNode, st.integers(0, n - 1), st.booleans() if primed else st.just(False))
    return st.lists(st.builds(Atom, node, st.sampled_from([">", ">=", "=", "<", "<="]), node), max_size=6)


@st.composite
def constraints(draw, n=None):
    n = n or draw(st.integers(1, 3))
    return close(MonotonicityConstraint.from_atoms(n, draw(atoms_strategy(n))))


def _holds(g: MonotonicityConstraint, vals) -> bool:
    for a in g.atoms():
        x = vals[a.lhs.node(g.n)]
        y = vals[a.rhs.node(g.n)]
        if not {">": x > y, ">=": x >= y, "=": x == y, "<": x < y, "<=": x <= y}[a.rel]:
            return False
    return True


def test_atom_arcs_orient_lesser_relations():
    assert list(Atom(VarNode(0), "<", VarNode(1, True)).arcs(2)) == [(3, 0, True)]
    assert sorted(Atom(VarNode(0), "=", VarNode(1)).arcs(2)) == [(0, 1, False), (1, 0, False)]
    with pytest.raises(UsageError):
        Atom(VarNode(0), "!=", VarNode(1))


def test_close_derives_transitive_strictness():
    g = close(mc(2, (0, ">", 1), (1, ">=", 0, False, True)))
    assert g.relation(VarNode(0), VarNode(0, True)) == ">"
    assert entails(g, Atom(VarNode(0), ">", VarNode(0, True)))
    assert not entails(g, Atom(VarNode(1), ">", VarNode(0, True)))


def test_close_detects_strict_cycle():
    g = close(mc(2, (0, ">", 1), (1, ">=", 0)))
    assert g.bottom and not is_satisfiable(g)
    assert canonical_key(g) == BOTTOM_KEY


def test_close_uses_endpoint_invariants():
    inv = Invariant.from_atoms(2, [Atom(VarNode(0), "<", VarNode(1))])
    g = close(mc(2, (1, "=", 0, False, True)), inv, inv)
    assert g.relation(VarNode(0), VarNode(0, True)) == "<"


def test_invariant_rejects_primes_and_contradictions():
    with pytest.raises(UsageError):
        Invariant.from_atoms(1, [Atom(VarNode(0, True), ">", VarNode(0))])
    with pytest.raises(UsageError):
        Invariant.from_atoms(2, [Atom(VarNode(0), ">", VarNode(1)), Atom(VarNode(1), ">", VarNode(0))])


def test_invariant_conjoin_and_implies():
    lt = Invariant.from_atoms(2, [Atom(VarNode(0), "<", VarNode(1))])
    le = Invariant.from_atoms(2, [Atom(VarNode(0), "<=", VarNode(1))])
    gt = Invariant.from_atoms(2, [Atom(VarNode(0), ">", VarNode(1))])
    assert lt.implies(le) and not le.implies(lt)
    assert lt.conjoin(gt) is None
    assert le.conjoin(lt) == lt
    assert lt.is_total() and not Invariant.top(2).is_total()


def test_compose_matches_hand_computation():
    # x > x' then x >= x'  gives x > x'
    g1 = close(mc(1, (0, ">", 0, False, True)))
    g2 = close(mc(1, (0, ">=", 0, False, True)))
    h = compose(g1, g2)
    assert h.relation(VarNode(0), VarNode(0, True)) == ">"


def test_compose_rejects_endpoint_mismatch():
    g1 = close(mc(1, (0, ">", 0, False, True), src="f", tgt="g"))
    with pytest.raises(UsageError):
        compose(g1, g1)


def test_compose_unsatisfiable_path():
    g1 = close(mc(2, (0, ">", 1, True, True)))  # x' > y'
    g2 = close(mc(2, (0, "<", 1)))  # x < y
    assert compose(g1, g2).bottom
    assert not compose(g2, g1).bottom


def test_collapse_of_path_and_bottom_cycle():
    system = mcs("vars x\nedge a: f -> f { x > x' }\nedge b: f -> f { x < x' }\n")
    h = collapse(("a", "a"), system)
    assert h.relation(VarNode(0), VarNode(0, True)) == ">"
    ab = collapse(("a", "b"), system)
    assert ab.relation(VarNode(0), VarNode(0, True)) is None


def test_collapse_rejects_broken_path():
    system = mcs("vars x\nedge a: f -> g { x > x' }\n")
    with pytest.raises(UsageError):
        collapse(("a", "a"), system)


def test_reindex_swaps_variables():
    g = close(mc(2, (0, ">", 1, False, True)))
    h = reindex(g, (1, 0), (1, 0))
    assert h.relation(VarNode(1), VarNode(0, True)) == ">"


def test_multipath_graph_layout():
    g = close(mc(1, (0, ">", 0, False, True)))
    size, arcs = multipath_graph([g, g])
    assert size == 3
    assert (0, 1, True) in arcs and (1, 2, True) in arcs


def test_mcs_validation():
    g = close(mc(1, (0, ">", 0, False, True)))
    with pytest.raises(UsageError):
        Mcs(("x",), {"f": Invariant.top(1)}, (g.relabel(name="a"), g.relabel(name="a")))
    with pytest.raises(UsageError):
        Mcs(("x",), {"f": Invariant.top(1)}, (g.relabel(tgt="h", name="a"),))
    with pytest.raises(UsageError):
        Mcs(("x",), {"f": Invariant.top(1)}, (), root="nowhere")


def test_build_names_edges_and_declares_points():
    g = mc(1, (0, ">", 0, False, True), src="f", tgt="g")
    s = Mcs.build(("x",), [], [g, g])
    assert [e.name for e in s.edges] == ["e1", "e2"]
    assert list(s.points) == ["f", "g"]
    assert s.edge("e2").origin == "e2"


def test_mcs_equality_tracks_point_order():
    a = mcs("vars x\npoint f\npoint g\n")
    b = mcs("vars x\npoint g\npoint f\n")
    assert a != b and a == mcs("vars x\npoint f\npoint g\n")


@settings(max_examples=150, deadline=None)
@given(constraints(), st.data())
def test_closure_is_idempotent_and_sound(g, data):
    assert close(g) == g
    if g.bottom:
        return
    vals = sample_solution(g.ge, g.gt, random.Random(data.draw(st.integers(0, 10**6))))
    assert vals is not None and _holds(g, vals)


@settings(max_examples=120, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(constraints(n), constraints(n), constraints(n))))
def test_compose_associative_and_agrees_with_floyd(gs):
    a, b, c = gs
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    assert canonical_key(left) == canonical_key(right)
    ab = compose(a, b)
    assert canonical_key(ab) == canonical_key(_join(a, b))
