from __future__ import annotations

from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load, mcs
from mcsterm.core import Atom, Invariant, UsageError, VarNode
from mcsterm.oracle import CorpusSpec, path_correspondence, random_corpus
from mcsterm.transform import (
    PointMapping,
    enumerate_orderings,
    fully_elaborate,
    has_downward_closure,
    is_stable,
    ordered_bell,
    ordering_invariant,
    ordering_renaming,
    partial_elaborate,
    restrict_reachable,
    stabilize,
    to_original_indices,
)


def brute_weak_orders(n: int) -> int:
    """Distinct rank patterns of n items (values 0..n-1, compressed)."""
    seen = set()
    for vals in product(range(n), repeat=n):
        ranks = sorted(set(vals))
        seen.add(tuple(ranks.index(v) for v in vals))
    return len(seen)


@pytest.mark.parametrize("n,expected", [(1, 1), (2, 3), (3, 13), (4, 75), (5, 541)])
def test_ordering_counts(n, expected):
    assert len(enumerate_orderings(n)) == expected == ordered_bell(n)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ordering_counts_brute_force(n):
    assert len(enumerate_orderings(n)) == brute_weak_orders(n)


def test_orderings_are_distinct_and_exclusive():
    ords = enumerate_orderings(3)
    assert len(set(ords)) == len(ords)
    invs = [ordering_invariant(3, o) for o in ords]
    for a in range(len(invs)):
        assert invs[a].is_total()
        for b in range(a + 1, len(invs)):
            assert invs[a].conjoin(invs[b]) is None


def test_enumerate_orderings_rejects_zero():
    with pytest.raises(UsageError):
        enumerate_orderings(0)


def test_ordering_renaming_sorts_by_value():
    ordering = (frozenset({2}), frozenset({0, 1}))
    assert ordering_renaming(ordering) == (2, 0, 1)


def test_stabilize_example_is_stable():
    system = mcs("vars x y\nedge a: f -> f { x < y, x' > y' }\n")
    stable, mapping = stabilize(system)
    assert is_stable(stable)
    assert {mapping.origin(p) for p in stable.points} == {"f"}
    # the split on x vs y gives distinct copies for x<y and x>y
    assert len(stable.points) >= 2


def test_stabilize_keeps_stable_system_unchanged():
    system = load("ex22")
    stable, mapping = stabilize(system)
    # ex22's only edge fixes m > n at the source but says nothing of m', n'
    assert is_stable(stable)
    assert all(mapping.origin(p) == "f" for p in stable.points)


def test_stabilize_drops_unsatisfiable_edges():
    system = mcs("vars x\nedge a: f -> f { x > x }\nedge b: f -> f { x > x' }\n")
    stable, _ = stabilize(system)
    assert [g.name for g in stable.edges] == ["b"]


def test_fully_elaborate_chain_invariants_and_downward_closure():
    elab, mapping = fully_elaborate(load("ex21"))
    for p, inv in elab.points.items():
        assert inv.is_total()
        for k in range(elab.n - 1):
            assert inv.relation(k, k + 1) in ("<", "=")
        assert sorted(mapping.renaming(p)) == [0, 1, 2]
    for g in elab.edges:
        assert has_downward_closure(g)


def test_fully_elaborate_rooted_is_subset():
    system = load("rooted")
    full, fmap = fully_elaborate(system)
    rooted, mapping = fully_elaborate(system, root="p0")
    assert len(rooted.points) < len(full.points)
    full_invs = {(fmap.origin(p), inv) for p, inv in full.points.items()}
    assert {(mapping.origin(p), inv) for p, inv in rooted.points.items()} <= full_invs
    assert {mapping.origin(p) for p in rooted.points} == {"p0", "p1", "p2"}
    # a point with a single reachable copy keeps its name
    assert "p2" in rooted.points
    with pytest.raises(UsageError):
        fully_elaborate(system, root="missing")


def test_to_original_indices_recovers_orderings():
    system = load("ex22")
    elab, mapping = fully_elaborate(system)
    back = to_original_indices(elab, mapping)
    gt = Invariant.from_atoms(2, [Atom(VarNode(0), ">", VarNode(1))])
    assert any(inv == gt for inv in back.points.values())


def test_partial_elaborate_checks_cases():
    system = mcs("vars x y\nedge a: f -> f { x > x' }\n")
    lt = Invariant.from_atoms(2, [Atom(VarNode(0), "<", VarNode(1))])
    ge = Invariant.from_atoms(2, [Atom(VarNode(0), ">=", VarNode(1))])
    le = Invariant.from_atoms(2, [Atom(VarNode(0), "<=", VarNode(1))])
    out, mapping = partial_elaborate(system, "f", [lt, ge], ["low", "high"])
    assert list(out.points) == ["low", "high"]
    assert mapping.origin("low") == "f"
    # every copy pair gets its own edge
    assert len(out.edges) == 4
    with pytest.raises(UsageError):
        partial_elaborate(system, "f", [lt, le])  # overlap
    with pytest.raises(UsageError):
        partial_elaborate(system, "f", [lt])  # misses x >= y
    with pytest.raises(UsageError):
        partial_elaborate(system, "nowhere", [lt, ge])


def test_restrict_reachable():
    system = load("rooted")
    sub = restrict_reachable(system, "p1")
    assert set(sub.points) == {"p1", "p2"}


def test_point_mapping_composition():
    outer = PointMapping({"a": ("f", (1, 0))})
    inner = PointMapping({"b": ("a", (1, 0))})
    assert outer.then(inner).entries == {"b": ("f", (0, 1))}


@pytest.mark.parametrize("name", ["ex21", "ex22", "ex23", "ex25", "rooted"])
def test_path_correspondence_examples(name):
    system = load(name)
    stable, mp = stabilize(system)
    assert path_correspondence(system, stable, mp, 3)
    elab, mp = fully_elaborate(system)
    assert path_correspondence(system, elab, mp, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_corpus_stabilize_and_elaborate_preserve_paths(seed):
    system = random_corpus(CorpusSpec(seed=seed, count=1))[0]
    stable, mp = stabilize(system)
    assert is_stable(stable)
    assert path_correspondence(system, stable, mp, 3)
    elab, mp = fully_elaborate(system)
    assert all(inv.is_total() for inv in elab.points.values())
    assert path_correspondence(system, elab, mp, 2)
