from __future__ import annotations

import pytest

from conftest import SAMPLES, load, mc, mcs
from mcsterm.core import InvariantViolation, UsageError, VarNode, close, compose
from mcsterm.oracle import concrete_prefix_check
from mcsterm.termination import (
    ALGORITHMS,
    Assignment,
    balance_rounds,
    balanced_extension,
    check_assignment,
    circular_variant,
    closure_set,
    decide,
    find_witness,
    has_balanced_strict_cycle,
    idempotent_power,
    is_idempotent,
    ltt1,
    ltt_general,
    ltts,
    witness_assignment,
    witness_extend,
)


# x > x'
DESC = close(mc(1, (0, ">", 0, False, True)))
# x >= x'
WEAK = close(mc(1, (0, ">=", 0, False, True)))
# x < x'
ASC = close(mc(1, (0, "<", 0, False, True)))
# x < y, x < x', y = y'
COUNT_UP = close(mc(2, (0, "<", 1), (0, "<", 0, False, True), (1, "=", 1, False, True)))


@pytest.mark.parametrize("name", SAMPLES)
@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_samples_terminate(name, algorithm):
    assert decide(load(name), algorithm).terminating


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_single_loops(algorithm):
    assert not decide(load("loop_geq"), algorithm).terminating
    assert decide(load("count_up"), algorithm).terminating
    assert not decide(mcs("vars x\nedge f -> f { x > x' }\n"), algorithm).terminating


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_rooted_example(algorithm):
    system = load("rooted")
    assert not decide(system, algorithm).terminating
    assert decide(system, algorithm, root="p0").terminating


def test_unknown_algorithm_and_root():
    with pytest.raises(UsageError):
        decide(load("ex22"), "magic")
    with pytest.raises(UsageError):
        decide(load("ex22"), root="nowhere")


def test_empty_and_acyclic_systems_terminate():
    assert decide(mcs("")).terminating
    assert decide(mcs("vars x\nedge a -> b { x > x' }\n")).terminating


def test_closure_set_members_and_paths():
    system = mcs("vars x\nedge a: f -> f { x >= x' }\nedge b: f -> f { x > x' }\n")
    cs = closure_set(system)
    keys = {m.mc.relation(VarNode(0), VarNode(0, True)) for m in cs}
    assert keys == {">=", ">"}
    for m in cs:
        from mcsterm.core import collapse

        assert collapse(m.path, system) == m.mc.relabel(name=m.mc.name)


def test_closure_set_subsumption_keeps_weakest():
    system = mcs("vars x\nedge a: f -> f { x >= x' }\nedge b: f -> f { x > x' }\n")
    assert len(closure_set(system, subsume=True)) == 1


def test_ltts_on_basic_loops():
    assert not ltts(DESC)  # descent alone is not bounded below
    assert not ltts(WEAK)
    assert ltts(COUNT_UP)  # x approaches y from below
    # x > x', x > y, y <= y': x descends towards a rising bound
    g = close(mc(2, (0, ">", 0, False, True), (0, ">", 1), (1, "<=", 1, False, True)))
    assert ltts(g)


def test_ltt1_requires_idempotent():
    g = close(mc(2, (0, "=", 1, False, True), (1, "=", 0, False, True)))  # swap
    assert not is_idempotent(g)
    with pytest.raises(UsageError):
        ltt1(g)
    assert ltt1(COUNT_UP) is True
    assert ltt1(DESC) is False


def test_idempotent_power_of_swap():
    g = close(mc(2, (0, ">", 1, False, True), (1, "=", 0, False, True)))
    p = idempotent_power(g)
    assert is_idempotent(p)
    assert canonical(compose(p, p)) == canonical(p)


def canonical(g):
    from mcsterm.core import canonical_key

    return canonical_key(g)


def test_balanced_extension():
    # x > y alone: one round copies it onto the targets
    g = close(mc(2, (0, ">", 1)))
    b, rounds = balance_rounds(g)
    assert b.relation(VarNode(0, True), VarNode(1, True)) == ">"
    assert rounds == 1
    assert balanced_extension(b) == b


def test_balanced_strict_cycle():
    # x > y', y > x' : two steps give x > x'' with no shift
    g = close(mc(2, (0, ">", 1, False, True), (1, ">", 0, False, True)))
    assert not has_balanced_strict_cycle(g)
    # x > y', y' >= x'... a strict cycle with balance 0 makes g^k bottom
    h = close(mc(2, (0, ">", 1), (1, "=", 0, True, True), (0, "=", 1, False, True)))
    assert has_balanced_strict_cycle(h)
    assert ltt_general(h)


def test_ltt_general_on_basic_loops():
    assert ltt_general(COUNT_UP)
    assert not ltt_general(DESC)
    assert not ltt_general(WEAK)


def test_circular_variant_shape():
    cv = circular_variant(COUNT_UP)
    assert cv.shortcuts == ((0, 2), (1, 3))
    assert cv.edge_count() == len(cv.base_arcs()) + 2
    with pytest.raises(UsageError):
        circular_variant(close(mc(1, src="f", tgt="g")))


def test_witness_for_weak_descent_is_constant():
    a = witness_assignment(WEAK, 5)
    assert len(a) == 6
    assert check_assignment([WEAK] * 5, a)


def test_witness_for_ascent_grows():
    a = witness_assignment(ASC, 4)
    vals = [a[t, 0] for t in range(5)]
    assert vals == sorted(vals) and len(set(vals)) == 5


def test_witness_rejects_terminating_mc():
    with pytest.raises(UsageError):
        witness_assignment(COUNT_UP, 3)


def test_check_assignment_detects_violation():
    assert check_assignment([DESC, DESC], [(3,), (2,), (1,)])
    assert not check_assignment([DESC, DESC], [(3,), (3,), (1,)])
    assert not check_assignment([DESC, DESC], [(3,), (2,)])


def test_witness_extend_keeps_boundary():
    system = mcs("vars x\nedge a: f -> f { x > x' }\n")
    inner = witness_assignment(DESC, 2)
    ext = witness_extend(("a",), system, inner, 3, factor=1)
    assert [r[0] for r in ext.rows] == [inner[t, 0] for t in range(3)]


@pytest.mark.parametrize("name,root", [("loop_geq", None), ("rooted", None)])
def test_find_witness_is_a_concrete_run(name, root):
    system = load(name)
    w = find_witness(system, 100, root)
    assert len(w.prefix) == 100
    assert concrete_prefix_check(w.run, system, w.prefix)


def test_find_witness_on_terminating_system_fails():
    with pytest.raises(InvariantViolation):
        find_witness(load("ex22"), 10)


def test_decide_attaches_witness_with_requested_length():
    v = decide(load("loop_geq"), witness=50)
    assert not v.terminating and v.result == "nonterminating"
    assert len(v.witness.prefix) == 50
    assert v.cycle == ("G1",)


def test_assignment_indexing():
    a = Assignment(((1, 2), (3, 4)))
    assert a[1, 0] == 3 and len(a) == 2
