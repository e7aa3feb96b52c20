from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SAMPLES, load, mc, mcs
from mcsterm.core import Atom, MonotonicityConstraint, UsageError, VarNode, canonical_key, close
from mcsterm.oracle import (
    CorpusSpec,
    collapses_saturate,
    concrete_prefix_check,
    enumerate_collapses,
    random_corpus,
    sct_difference_oracle,
    walk_oracle,
)
from mcsterm.termination import closure_set, find_witness, ltt_general, ltts


def test_collapses_of_trivial_systems():
    assert enumerate_collapses(mcs("")) == set()
    assert collapses_saturate(mcs("vars x\npoint f\n")) == (set(), True)
    one = enumerate_collapses(mcs("vars x\nedge a: f -> g { x > x' }\n"))
    assert len(one) == 1


def test_collapses_saturate_on_self_loop():
    found, saturated = collapses_saturate(mcs("vars x\nedge a: f -> f { x >= x' }\n"))
    assert saturated and len(found) == 1
    with pytest.raises(UsageError):
        collapses_saturate(mcs(""), max_len=11)


@pytest.mark.parametrize("name", ["ex21", "ex22", "ex23", "count_up", "loop_geq"])
def test_closure_set_matches_enumerated_collapses(name):
    system = load(name)
    found, saturated = collapses_saturate(system)
    assert saturated
    mine = {(canonical_key(m.mc), m.mc.src, m.mc.tgt) for m in closure_set(system)}
    theirs = {(canonical_key(g), g.src, g.tgt) for g in found}
    assert mine == theirs


def test_walk_oracle_descent_has_forward_strict_cycle():
    rep = walk_oracle(close(mc(1, (0, ">", 0, False, True))))
    assert rep.forward.get(0)  # x -> x' (strict) then x' -> x
    assert not rep.backward
    assert not rep.stable_pass and not rep.general_pass


def test_walk_oracle_bounded_descent_passes():
    g = close(mc(2, (0, "<", 1), (0, "<", 0, False, True), (1, "=", 1, False, True)))
    rep = walk_oracle(g)
    assert rep.stable_pass and rep.general_pass


def test_walk_oracle_rejects_bad_input():
    with pytest.raises(UsageError):
        walk_oracle(close(mc(1, src="f", tgt="g")))
    with pytest.raises(UsageError):
        walk_oracle(close(mc(1)), max_walk_len=9)


def _random_mc(n, atoms):
    return close(MonotonicityConstraint.from_atoms(n, atoms))


node2 = st.builds(VarNode, st.integers(0, 1), st.booleans())
atoms2 = st.lists(st.builds(Atom, node2, st.sampled_from([">", ">=", "="]), node2), max_size=5)


@settings(max_examples=200, deadline=None)
@given(atoms2)
def test_walk_oracle_agrees_with_ltts(atoms):
    g = _random_mc(2, atoms)
    if g.bottom:
        return
    assert walk_oracle(g).stable_pass == ltts(g)


@settings(max_examples=200, deadline=None)
@given(atoms2)
def test_walk_oracle_agrees_with_ltt_general(atoms):
    g = _random_mc(2, atoms)
    assert walk_oracle(g).general_pass == ltt_general(g)


@pytest.mark.parametrize("name", [*SAMPLES, "count_up", "crossover"])
def test_sct_oracle_on_terminating_examples(name):
    v = sct_difference_oracle(load(name))
    assert v.terminating and v.algorithm == "sct-difference"


def test_sct_oracle_nonterminating_and_rooted():
    assert not sct_difference_oracle(load("loop_geq")).terminating
    assert not sct_difference_oracle(load("rooted")).terminating
    assert sct_difference_oracle(load("rooted"), root="p0").terminating


def test_concrete_prefix_check_accepts_witness_and_rejects_perturbation():
    system = load("loop_geq")
    w = find_witness(system, 20)
    assert concrete_prefix_check(w.run, system, w.prefix)
    rows = [list(r) for r in w.prefix]
    rows[5][0] = rows[4][0] + 1  # x' > x breaks x >= x'
    assert not concrete_prefix_check(w.run, system, rows)


def test_concrete_prefix_check_edge_cases():
    system = load("count_up")
    assert concrete_prefix_check((), system, [])
    assert not concrete_prefix_check(("G1",), system, [(0, 5)])  # too few states
    assert concrete_prefix_check(("G1",), system, [(0, 5), (1, 5)])
    assert not concrete_prefix_check(("G1",), system, [(5, 5), (6, 5)])


def test_concrete_prefix_check_uses_point_invariants():
    system = mcs("vars x y\npoint f invariant { x < y }\nedge a: f -> f { x < x' }\n")
    assert concrete_prefix_check(("a",), system, [(0, 3), (1, 3)])
    assert not concrete_prefix_check(("a",), system, [(0, 3), (4, 3)])


def test_corpus_is_reproducible():
    a = random_corpus(CorpusSpec(seed=3, count=15))
    b = random_corpus(CorpusSpec(seed=3, count=15))
    c = random_corpus(CorpusSpec(seed=4, count=15))
    assert a == b and a != c
    assert all(1 <= s.n <= 3 and 1 <= len(s.points) <= 2 for s in a)


def test_corpus_spec_validation():
    with pytest.raises(UsageError):
        CorpusSpec(count=-1)
    with pytest.raises(UsageError):
        CorpusSpec(density=1.5)


def test_small_corpus_has_both_classes(small_corpus):
    verdicts = [sct_difference_oracle(s).terminating for s in small_corpus]
    assert len(verdicts) == 120
    assert sum(verdicts) >= 12 and len(verdicts) - sum(verdicts) >= 12
