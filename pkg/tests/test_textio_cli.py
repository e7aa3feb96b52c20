from __future__ import annotations

import json

import pytest

from conftest import ROOT, SYSTEMS, load, mcs
from mcsterm.cli import main
from mcsterm.core import Atom, VarNode
from mcsterm.termination import decide
from mcsterm.textio import ParseError, emit_report, format_mcs, parse_mcs, render_ranking
from mcsterm.ranking import synthesize_ranking
from mcsterm.transform import fully_elaborate, stabilize, to_original_indices

GOLDEN = ROOT / "tests" / "golden"
ALL = sorted(p.stem for p in SYSTEMS.glob("*.mcs"))


def run(capsysbinary, *argv):
    code = main(list(argv))
    out = capsysbinary.readouterr()
    return code, out.out, out.err.decode()


def test_parse_ex22():
    doc = parse_mcs((SYSTEMS / "ex22.mcs").read_text())
    s = doc.system
    assert s.names == ("m", "n")
    assert list(s.points) == ["f"]
    [g] = s.edges
    assert g.name == "G1" and g.src == g.tgt == "f"
    assert g.relation(VarNode(0), VarNode(1)) == ">"
    assert g.relation(VarNode(0), VarNode(0, True)) == ">"
    assert g.relation(VarNode(1), VarNode(1, True)) == "="
    assert doc.locations["edge:G1"] == (3, 1)


def test_parse_empty_and_comments():
    s = mcs("# nothing here\n")
    assert s.n == 0 and not s.points and not s.edges


def test_parse_invariant_root_and_unlabelled_edges():
    s = mcs("vars x y; point f invariant { x <= y }; edge f -> g { x > y' }; edge f -> f {}; root f\n")
    assert s.root == "f"
    assert s.points["f"].relation(0, 1) == "<="
    assert [g.name for g in s.edges] == ["e1", "e2"]


@pytest.mark.parametrize(
    "text,where,fragment",
    [
        ("vars x\nedge f -> f { x >> x' }\n", (2, 18), "expected a variable"),
        ("vars x\nedge f -> f { x > y' }\n", (2, 19), "unknown variable"),
        ("vars x\nedge f -> f { x > x'' }\n", (2, 21), "unexpected second prime"),
        ("vars x x\n", (1, 8), "duplicate"),
        ("vars x\npoint f invariant { x' > x }\n", (2, 22), "prime"),
        ("vars x y\npoint f invariant { x > y, y > x }\n", (2, 7), "unsatisfiable"),
        ("vars x\nroot g\n", (2, 6), "root"),
        ("vars x\nedge a: f -> f {}\nedge a: f -> f {}\n", (3, 1), "duplicate"),
    ],
)
def test_parse_errors_carry_position(text, where, fragment):
    with pytest.raises(ParseError) as info:
        parse_mcs(text)
    err = info.value
    assert (err.line, err.col) == where, str(err)
    assert fragment in err.message
    assert str(err).startswith(f"{where[0]}:{where[1]}: ")


@pytest.mark.parametrize("name", ALL)
def test_format_round_trip(name):
    s = load(name)
    text = format_mcs(s)
    assert parse_mcs(text).system == s
    assert format_mcs(parse_mcs(text).system) == text


@pytest.mark.parametrize("name", ["ex21", "ex22", "rooted"])
def test_transform_output_round_trips(name):
    stable, _ = stabilize(load(name))
    assert parse_mcs(format_mcs(stable)).system == stable
    elab, mp = fully_elaborate(load(name))
    back = to_original_indices(elab, mp)
    assert parse_mcs(format_mcs(back)).system == back


def test_format_prints_bottom_edges():
    s = mcs("vars x\nedge a: f -> f { x > x }\n")
    assert "x > x" in format_mcs(s)
    assert parse_mcs(format_mcs(s)).system.edges[0].bottom


def test_render_ranking_text():
    rho = synthesize_ranking(load("count_up"))
    text = render_ranking(rho)
    assert text.startswith("rho(f) =\n")
    assert "<2, y - x>  if x < y" in text


def test_report_json_shape():
    v = decide(load("loop_geq"), witness=4)
    data = json.loads(emit_report(v, fmt="json"))
    assert set(data) == {"verdict", "algorithm", "rooted", "witness", "ranking"}
    assert set(data["witness"]) == {"cycle", "stem", "prefix"}
    assert len(data["witness"]["prefix"]) == 4


@pytest.mark.parametrize(
    "golden,argv",
    [
        ("ex21_analyze.json", ["analyze", "ex21.mcs", "--json"]),
        ("rooted_rank_p0.json", ["rank", "rooted.mcs", "--root", "p0", "--json"]),
        ("loop_geq_witness5.json", ["analyze", "loop_geq.mcs", "--witness", "5", "--json"]),
    ],
)
def test_golden_json(capsysbinary, golden, argv):
    argv[1] = str(SYSTEMS / argv[1])
    for _ in range(2):  # byte-stable across runs
        _, out, _ = run(capsysbinary, *argv)
        assert out == (GOLDEN / golden).read_bytes()


@pytest.mark.parametrize("name", ["ex21", "ex22", "ex23", "ex24", "ex25", "count_up", "crossover"])
def test_exit_codes_terminating(capsysbinary, name):
    path = str(SYSTEMS / f"{name}.mcs")
    assert run(capsysbinary, "analyze", path)[0] == 0
    assert run(capsysbinary, "analyze", path, "--algorithm", "general")[0] == 0


def test_exit_codes_nonterminating_and_rooted(capsysbinary):
    assert run(capsysbinary, "analyze", str(SYSTEMS / "loop_geq.mcs"))[0] == 1
    rooted = str(SYSTEMS / "rooted.mcs")
    assert run(capsysbinary, "analyze", rooted)[0] == 1
    assert run(capsysbinary, "analyze", rooted, "--root", "p0")[0] == 0
    assert run(capsysbinary, "rank", rooted)[0] == 1
    code, out, _ = run(capsysbinary, "rank", rooted, "--root", "p0")
    assert code == 0 and b"rho(p0) =" in out


def test_exit_codes_usage_errors(capsysbinary, tmp_path):
    bad = tmp_path / "bad.mcs"
    bad.write_text("vars x\nedge f -> f { x > x'' }\n")
    code, _, err = run(capsysbinary, "analyze", str(bad))
    assert code == 2 and "2:21: unexpected second prime" in err
    assert run(capsysbinary, "analyze", str(tmp_path / "missing.mcs"))[0] == 2
    assert run(capsysbinary, "analyze", str(SYSTEMS / "ex21.mcs"), "--root", "zz")[0] == 2
    assert run(capsysbinary, "analyze", str(SYSTEMS / "ex21.mcs"), "--algorithm", "magic")[0] == 2
    assert run(capsysbinary, "transform", str(SYSTEMS / "ex21.mcs"))[0] == 2
    assert run(capsysbinary, "frobnicate")[0] == 2


def test_transform_command(capsysbinary):
    code, out, _ = run(capsysbinary, "transform", str(SYSTEMS / "ex22.mcs"), "--elaborate")
    assert code == 0
    s = parse_mcs(out.decode()).system
    assert all(inv.is_total() for inv in s.points.values())
    code, out, _ = run(capsysbinary, "transform", str(SYSTEMS / "rooted.mcs"), "--stabilize", "--root", "p1")
    assert code == 0
    assert parse_mcs(out.decode()).system.points


def test_witness_text_output(capsysbinary):
    code, out, _ = run(capsysbinary, "analyze", str(SYSTEMS / "loop_geq.mcs"), "--witness", "3")
    assert code == 1
    assert b"prefix (3 states)" in out


def test_selfcheck_small(capsysbinary):
    code, out, _ = run(capsysbinary, "selfcheck", "--count", "25", "--seed", "5", "--witness-length", "20")
    assert code == 0
    assert b"0 problems" in out


def test_atom_text_uses_variable_names():
    s = mcs("vars a b\nedge g: f -> f { a < b' }\n")
    assert "a < b'" in format_mcs(s) or "b' > a" in format_mcs(s)
    assert Atom(VarNode(0), "<", VarNode(1, True)).rel == "<"
