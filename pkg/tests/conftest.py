from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from mcsterm.core import Atom, Mcs, MonotonicityConstraint, VarNode
from mcsterm.oracle import CorpusSpec, random_corpus, sct_difference_oracle
from mcsterm.ranking import synthesize_ranking
from mcsterm.termination import ALGORITHMS, decide, find_witness
from mcsterm.textio import parse_mcs

ROOT = Path(__file__).resolve().parent.parent
SYSTEMS = ROOT / "systems"
SAMPLES = ("ex21", "ex22", "ex23", "ex24", "ex25")


def load(name: str) -> Mcs:
    return parse_mcs((SYSTEMS / f"{name}.mcs").read_text()).system


def mcs(text: str) -> Mcs:
    return parse_mcs(text).system


def mc(n: int, *atoms: tuple, src: str = "f", tgt: str = "f") -> MonotonicityConstraint:
    """Build an MC from tuples like ``(0, ">", 1, True)`` = x0 > x1'."""
    out = []
    for a in atoms:
        i, rel, j = a[:3]
        pi, pj = (a[3] if len(a) > 3 else False), (a[4] if len(a) > 4 else False)
        out.append(Atom(VarNode(i, pi), rel, VarNode(j, pj)))
    return MonotonicityConstraint.from_atoms(n, out, src, tgt)


@dataclass
class Analysis:
    system: Mcs
    verdicts: dict
    ranking: object = None
    witness: object = None
    witness_seconds: float = 0.0


@dataclass
class CorpusRun:
    spec: CorpusSpec
    items: list = field(default_factory=list)

    def terminating(self):
        return [a for a in self.items if a.verdicts["stable-closure"]]

    def nonterminating(self):
        return [a for a in self.items if not a.verdicts["stable-closure"]]


_CACHE: dict = {}


def corpus_run(count: int = 1000, seed: int = 0) -> CorpusRun:
    """Analyse the seeded corpus once per session (all verdicts, rankings, 100-step witnesses)."""
    key = (count, seed)
    if key in _CACHE:
        return _CACHE[key]
    spec = CorpusSpec(seed=seed, count=count)
    run = CorpusRun(spec)
    for system in random_corpus(spec):
        verdicts = {a: decide(system, a).terminating for a in ALGORITHMS}
        verdicts["sct-difference"] = sct_difference_oracle(system).terminating
        item = Analysis(system, verdicts)
        item.ranking = synthesize_ranking(system)
        if not verdicts["stable-closure"]:
            t0 = time.perf_counter()
            item.witness = find_witness(system, 100)
            item.witness_seconds = time.perf_counter() - t0
        run.items.append(item)
    _CACHE[key] = run
    return run


@pytest.fixture(scope="session")
def corpus() -> CorpusRun:
    return corpus_run()


@pytest.fixture(scope="session")
def small_corpus() -> list[Mcs]:
    return random_corpus(CorpusSpec(seed=7, count=120))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
