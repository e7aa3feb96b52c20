"""Reading and writing ``.mcs`` files, plus report rendering.

File grammar (whitespace-insensitive, ``#`` starts a line comment, ``;`` is an
optional separator)::

    system ::= stmt*
    stmt   ::= "vars" ident+
             | "point" ident ["invariant" "{" [atoms] "}"]
             | "edge" [ident ":"] ident "->" ident "{" [atoms] "}"
             | "root" ident
    atoms  ::= atom ("," atom)*
    atom   ::= term rel term
    term   ::= ident ["'"]
    rel    ::= "<" | "<=" | "=" | ">=" | ">"
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable

from .core import Atom, Invariant, Mcs, MonotonicityConstraint, UsageError, VarNode, close
from .ranking import Case, Diff, RankingFunction
from .termination import Verdict

__all__ = [
    "ParseError",
    "McsDocument",
    "parse_mcs",
    "format_mcs",
    "report_dict",
    "emit_report",
    "render_ranking",
]

KEYWORDS = frozenset({"vars", "point", "invariant", "edge", "root"})


class ParseError(UsageError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # ident, rel, punct, eof
    text: str
    line: int
    col: int


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<rel><=|>=|<|>|=)|(?P<arrow>->)|(?P<punct>[{},;:'])"
)


def _tokens(text: str) -> list[Token]:
    out = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        # the arrow must win over '-' so try it first
        if text.startswith("->", pos):
            out.append(Token("arrow", "->", line, pos - start + 1))
            pos += 2
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


@dataclass
class McsDocument:
    """A parsed system and where its parts were declared (``kind:name -> (line, col)``)."""

    system: Mcs
    locations: dict[str, tuple[int, int]] = field(default_factory=dict)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokens(text)
        self.pos = 0
        self.names: list[str] | None = None
        self.points: dict[str, Invariant | None] = {}
        self.explicit: set[str] = set()
        self.edges: list[tuple[str | None, str, str, list[Atom], Token]] = []
        self.root: tuple[str, Token] | None = None
        self.locations: dict[str, tuple[int, int]] = {}

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def take(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", t.line, t.col)
        return self.take()

    def ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ParseError(f"expected {what}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.take()

    def at_punct(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == text

    # grammar
    def parse(self) -> McsDocument:
        while self.peek().kind != "eof":
            t = self.peek()
            if self.at_punct(";"):
                self.take()
                continue
            if t.kind != "ident" or t.text not in KEYWORDS or t.text == "invariant":
                raise ParseError(f"expected a statement, found {t.text!r}", t.line, t.col)
            getattr(self, f"stmt_{t.text}")()
        return self.finish()

    def stmt_vars(self) -> None:
        kw = self.take()
        if self.names is not None:
            raise ParseError("variables declared twice", kw.line, kw.col)
        if self.points or self.edges:
            raise ParseError("variables must be declared before points and edges", kw.line, kw.col)
        names = []
        while self.peek().kind == "ident" and self.peek().text not in KEYWORDS:
            t = self.take()
            if t.text in names:
                raise ParseError(f"duplicate variable {t.text!r}", t.line, t.col)
            names.append(t.text)
        if not names:
            t = self.peek()
            raise ParseError("expected at least one variable name", t.line, t.col)
        self.names = names

    def stmt_point(self) -> None:
        self.take()
        t = self.ident("a point name")
        if t.text in self.explicit:
            raise ParseError(f"point {t.text!r} declared twice", t.line, t.col)
        self.explicit.add(t.text)
        self.locations.setdefault(f"point:{t.text}", (t.line, t.col))
        inv = None
        if self.peek().kind == "ident" and self.peek().text == "invariant":
            self.take()
            atoms = self.atom_block(primes=False)
            try:
                inv = Invariant.from_atoms(len(self.names or ()), atoms)
            except UsageError:
                raise ParseError(f"invariant of {t.text!r} is unsatisfiable", t.line, t.col) from None
        self.points[t.text] = inv

    def stmt_edge(self) -> None:
        kw = self.take()
        label = None
        if self.peek(1).kind == "punct" and self.peek(1).text == ":":
            label = self.ident("an edge label").text
            self.take()
        src = self.ident("a source point")
        self.expect("arrow")
        tgt = self.ident("a target point")
        atoms = self.atom_block(primes=True)
        for p in (src, tgt):
            self.points.setdefault(p.text, None)
            self.locations.setdefault(f"point:{p.text}", (p.line, p.col))
        self.edges.append((label, src.text, tgt.text, atoms, kw))

    def stmt_root(self) -> None:
        kw = self.take()
        if self.root is not None:
            raise ParseError("root declared twice", kw.line, kw.col)
        t = self.ident("a point name")
        self.root = (t.text, t)

    def atom_block(self, primes: bool) -> list[Atom]:
        self.expect("punct", "{")
        atoms = []
        if not self.at_punct("}"):
            atoms.append(self.atom(primes))
            while self.at_punct(","):
                self.take()
                atoms.append(self.atom(primes))
        self.expect("punct", "}")
        return atoms

    def term(self, primes: bool) -> VarNode:
        t = self.ident("a variable")
        names = self.names or []
        if t.text not in names:
            raise ParseError(f"unknown variable {t.text!r}", t.line, t.col)
        primed = False
        if self.at_punct("'"):
            q = self.take()
            if not primes:
                raise ParseError("primed variable in an invariant", q.line, q.col)
            primed = True
            if self.at_punct("'"):
                q = self.peek()
                raise ParseError("unexpected second prime", q.line, q.col)
        return VarNode(names.index(t.text), primed)

    def atom(self, primes: bool) -> Atom:
        lhs = self.term(primes)
        rel = self.expect("rel").text
        rhs = self.term(primes)
        return Atom(lhs, rel, rhs)

    def finish(self) -> McsDocument:
        names = tuple(self.names or ())
        n = len(names)
        points = {p: (inv if inv is not None else Invariant.top(n)) for p, inv in self.points.items()}
        built = []
        seen: dict[str, Token] = {}
        for k, (label, src, tgt, atoms, tok) in enumerate(self.edges):
            name = label or f"e{k + 1}"
            if name in seen:
                raise ParseError(f"duplicate edge id {name!r}", tok.line, tok.col)
            seen[name] = tok
            self.locations[f"edge:{name}"] = (tok.line, tok.col)
            built.append(MonotonicityConstraint.from_atoms(n, atoms, src, tgt, name=name))
        root = None
        if self.root is not None:
            root, tok = self.root
            if root not in points:
                raise ParseError(f"unknown root point {root!r}", tok.line, tok.col)
        return McsDocument(Mcs.build(names, points, built, root), self.locations)


def parse_mcs(text: str) -> McsDocument:
    """Parse the ``.mcs`` text format; raises :class:`ParseError` with a line and column."""
    return _Parser(text).parse()


# ----------------------------------------------------------------------------
# printing


def _term(names, v: VarNode) -> str:
    return names[v.index] + ("'" if v.primed else "")


def _atom_text(names, a: Atom) -> str:
    return f"{_term(names, a.lhs)} {a.rel} {_term(names, a.rhs)}"


def _minimal_edge_atoms(g: MonotonicityConstraint, src: Invariant, tgt: Invariant) -> list[Atom]:
    atoms = g.atoms()
    target = close(g, src, tgt)
    k = 0
    while k < len(atoms):
        trial = atoms[:k] + atoms[k + 1:]
        h = close(MonotonicityConstraint.from_atoms(g.n, trial, g.src, g.tgt), src, tgt)
        if h == target:
            atoms = trial
        else:
            k += 1
    return atoms


def _minimal_invariant_atoms(inv: Invariant) -> list[Atom]:
    atoms = inv.atoms()
    k = 0
    while k < len(atoms):
        trial = atoms[:k] + atoms[k + 1:]
        if Invariant.from_atoms(inv.n, trial) == inv:
            atoms = trial
        else:
            k += 1
    return atoms


def format_mcs(system: Mcs) -> str:
    """Render a system in the input grammar; ``parse_mcs`` of the result equals ``system``."""
    names = system.names
    lines = []
    if names:
        lines.append("vars " + " ".join(names))
    for p, inv in system.points.items():
        atoms = _minimal_invariant_atoms(inv)
        if atoms:
            body = ", ".join(_atom_text(names, a) for a in atoms)
            lines.append(f"point {p} invariant {{ {body} }}")
        else:
            lines.append(f"point {p}")
    for g in system.edges:
        if g.bottom:
            if not names:
                raise UsageError("cannot print an unsatisfiable edge without variables")
            body = f"{names[0]} > {names[0]}"
        else:
            atoms = _minimal_edge_atoms(g, system.points[g.src], system.points[g.tgt])
            body = ", ".join(_atom_text(names, a) for a in atoms)
        lines.append(f"edge {g.name}: {g.src} -> {g.tgt} {{ {body} }}" if body else f"edge {g.name}: {g.src} -> {g.tgt} {{ }}")
    if system.root is not None:
        lines.append(f"root {system.root}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# reports


def _diff_text(names, d: Diff) -> str:
    return f"{names[d.hi]} - {names[d.lo]}"


def _guard_atoms(names, case: Case) -> list[str]:
    out = []
    blocks = [sorted(b) for b in case.order]
    for block in blocks:
        for a, b in zip(block, block[1:]):
            out.append(f"{names[a]} = {names[b]}")
    for lower, upper in zip(blocks, blocks[1:]):
        out.append(f"{names[lower[0]]} < {names[upper[0]]}")
    for a, rel, b in case.diffs:
        out.append(f"({_diff_text(names, a)}) {rel} ({_diff_text(names, b)})")
    return out


def _vector_json(names, vec) -> list:
    return [_diff_text(names, v) if isinstance(v, Diff) else v for v in vec]


def report_dict(verdict: Verdict | None, ranking: RankingFunction | None = None, *,
                names: Iterable[str] = (), algorithm: str | None = None,
                rooted: str | None = None, terminating: bool | None = None) -> dict:
    """The JSON report as an ordered dict."""
    names = tuple(names)
    if verdict is not None:
        terminating = verdict.terminating
        algorithm = verdict.algorithm
        rooted = verdict.rooted
    witness = None
    if verdict is not None and verdict.witness is not None:
        w = verdict.witness
        witness = {
            "cycle": list(w.cycle),
            "stem": list(w.stem),
            "prefix": [list(r) for r in w.prefix],
        }
    rank = None
    if ranking is not None:
        names = ranking.names
        rank = [
            {
                "point": p,
                "cases": [
                    {"guard": _guard_atoms(names, c), "vector": _vector_json(names, c.vector)}
                    for c in cases
                ],
            }
            for p, cases in ranking.cases.items()
        ]
    return {
        "verdict": "terminating" if terminating else "nonterminating",
        "algorithm": algorithm,
        "rooted": rooted,
        "witness": witness,
        "ranking": rank,
    }


def render_ranking(ranking: RankingFunction) -> str:
    """Case-expression display: one block per point, one guarded vector per line."""
    names = ranking.names
    lines = []
    for p, cases in ranking.cases.items():
        lines.append(f"rho({p}) =")
        rows = []
        for c in cases:
            vec = "<" + ", ".join(_diff_text(names, v) if isinstance(v, Diff) else str(v) for v in c.vector) + ">"
            chain = " < ".join(" = ".join(names[i] for i in sorted(b)) for b in c.order)
            extra = [f"{_diff_text(names, a)} {rel} {_diff_text(names, b)}" for a, rel, b in c.diffs]
            guard = " and ".join(x for x in [chain] + extra if x) or "true"
            rows.append((vec, guard))
        width = max((len(v) for v, _ in rows), default=0)
        for vec, guard in rows:
            lines.append(f"  {vec.ljust(width)}  if {guard}")
    return "\n".join(lines)


def _render_text(report: dict, ranking: RankingFunction | None) -> str:
    lines = [f"verdict: {report['verdict']}", f"algorithm: {report['algorithm']}"]
    if report["rooted"] is not None:
        lines.append(f"root: {report['rooted']}")
    w = report["witness"]
    if w is not None:
        lines.append("cycle: " + " ".join(w["cycle"]))
        if w["stem"]:
            lines.append("stem: " + " ".join(w["stem"]))
        lines.append(f"prefix ({len(w['prefix'])} states):")
        for t, row in enumerate(w["prefix"]):
            lines.append(f"  {t}: " + " ".join(str(v) for v in row))
    if ranking is not None:
        lines.append(render_ranking(ranking))
    return "\n".join(lines) + "\n"


def emit_report(verdict: Verdict | None, ranking: RankingFunction | None = None,
                fmt: str = "text", **kw) -> bytes:
    """Serialize a verdict and/or ranking as JSON (byte-stable) or text."""
    report = report_dict(verdict, ranking, **kw)
    if fmt == "json":
        return (json.dumps(report, indent=2, ensure_ascii=False) + "\n").encode()
    if fmt == "text":
        return _render_text(report, ranking).encode()
    raise UsageError(f"unknown report format {fmt!r}")
