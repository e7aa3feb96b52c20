"""Monotonicity constraints as closed weighted graphs.

A constraint over ``n`` variables has ``2n`` nodes: node ``i`` is the source
variable ``x_i`` and node ``n + i`` its primed (target) copy.  Relations are
kept as two bitmask rows per node: ``ge[u]`` holds every ``v`` with
``u >= v`` entailed (reflexive) and ``gt[u]`` every ``v`` with ``u > v``.
A strict arc has weight -1, a non-strict one weight 0; closing the graph is
min-weight path closure saturating at -1.

Variable indices are 0-based throughout the library.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "UsageError",
    "InvariantViolation",
    "VarNode",
    "Atom",
    "Arc",
    "Invariant",
    "MonotonicityConstraint",
    "Mcs",
    "close",
    "is_satisfiable",
    "entails",
    "compose",
    "collapse",
    "canonical_key",
    "multipath_graph",
    "reindex",
    "sample_solution",
]

RELATIONS = (">", ">=", "=", "<", "<=")
BOTTOM_KEY = b"\xff"


class UsageError(ValueError):
    """Caller violated an operation's precondition."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed."""


@dataclass(frozen=True, order=True)
class VarNode:
    index: int
    primed: bool = False

    def node(self, n: int) -> int:
        return self.index + n if self.primed else self.index


@dataclass(frozen=True)
class Atom:
    """``lhs rel rhs`` with ``rel`` one of ``> >= = < <=``."""

    lhs: VarNode
    rel: str
    rhs: VarNode

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise UsageError(f"unknown relation {self.rel!r}")

    def arcs(self, n: int) -> Iterator[tuple[int, int, bool]]:
        """Weighted arcs ``(from, to, strict)`` meaning ``from >= to`` / ``from > to``."""
        a, b = self.lhs.node(n), self.rhs.node(n)
        if self.rel in ("<", "<="):
            a, b = b, a
        if self.rel == "=":
            yield a, b, False
            yield b, a, False
        else:
            yield a, b, self.rel in (">", "<")


@dataclass(frozen=True)
class Arc:
    src: VarNode
    dst: VarNode
    strict: bool
    no_change: bool = False


def _close_masks(ge: list[int], gt: list[int]) -> bool:
    """Close ``ge``/``gt`` in place; return False if a strict cycle exists."""
    size = len(ge)
    for k in range(size):
        bit = 1 << k
        gek = ge[k]
        gtk = gt[k]
        for u in range(size):
            if ge[u] & bit:
                if gt[u] & bit:
                    gt[u] |= gek
                else:
                    gt[u] |= gtk
                ge[u] |= gek
    return not any(gt[u] >> u & 1 for u in range(size))


def _reflexive(size: int) -> list[int]:
    return [1 << u for u in range(size)]


@dataclass(frozen=True)
class Invariant:
    """Order constraints among the unprimed variables of one flow point."""

    n: int
    ge: tuple[int, ...]
    gt: tuple[int, ...]

    @classmethod
    def top(cls, n: int) -> "Invariant":
        return cls(n, tuple(_reflexive(n)), (0,) * n)

    @classmethod
    def from_atoms(cls, n: int, atoms: Iterable[Atom]) -> "Invariant":
        ge = _reflexive(n)
        gt = [0] * n
        for atom in atoms:
            if atom.lhs.primed or atom.rhs.primed:
                raise UsageError("invariants may only mention unprimed variables")
            for a, b, strict in atom.arcs(n):
                ge[a] |= 1 << b
                if strict:
                    gt[a] |= 1 << b
        if not _close_masks(ge, gt):
            raise UsageError("unsatisfiable invariant")
        return cls(n, tuple(ge), tuple(gt))

    @classmethod
    def from_masks(cls, n: int, ge: Sequence[int], gt: Sequence[int]) -> "Invariant | None":
        """Close the given relation; None when unsatisfiable."""
        ge, gt = list(ge), list(gt)
        for u in range(n):
            ge[u] |= 1 << u
        if not _close_masks(ge, gt):
            return None
        return cls(n, tuple(ge), tuple(gt))

    def relation(self, i: int, j: int) -> str | None:
        """Strongest entailed relation of ``x_i`` to ``x_j`` (``>``, ``>=``, ``=``, ...)."""
        return _relation(self.ge, self.gt, i, j)

    def entails(self, i: int, rel: str, j: int) -> bool:
        return _entails(self.ge, self.gt, i, rel, j)

    def conjoin(self, other: "Invariant") -> "Invariant | None":
        return Invariant.from_masks(
            self.n,
            [a | b for a, b in zip(self.ge, other.ge)],
            [a | b for a, b in zip(self.gt, other.gt)],
        )

    def implies(self, other: "Invariant") -> bool:
        return all(
            (o & ~s) == 0 and (ot & ~st) == 0
            for s, st, o, ot in zip(self.ge, self.gt, other.ge, other.gt)
        )

    def is_total(self) -> bool:
        return all(self.relation(i, j) is not None for i in range(self.n) for j in range(self.n))

    def atoms(self) -> list[Atom]:
        return list(_atoms_of(self.n, self.ge, self.gt, range(self.n), lambda u: VarNode(u)))


def _relation(ge, gt, u: int, v: int) -> str | None:
    if gt[u] >> v & 1:
        return ">"
    if gt[v] >> u & 1:
        return "<"
    fwd = ge[u] >> v & 1
    back = ge[v] >> u & 1
    if fwd and back:
        return "="
    if fwd:
        return ">="
    if back:
        return "<="
    return None


def _entails(ge, gt, u: int, rel: str, v: int) -> bool:
    if rel == ">":
        return bool(gt[u] >> v & 1)
    if rel == ">=":
        return bool(ge[u] >> v & 1)
    if rel == "<":
        return bool(gt[v] >> u & 1)
    if rel == "<=":
        return bool(ge[v] >> u & 1)
    if rel == "=":
        return bool(ge[u] >> v & 1 and ge[v] >> u & 1)
    raise UsageError(f"unknown relation {rel!r}")


def _atoms_of(size, ge, gt, nodes, to_var) -> Iterator[Atom]:
    """All pairwise relations among ``nodes``, one atom per unordered pair."""
    nodes = list(nodes)
    for a, u in enumerate(nodes):
        for v in nodes[a + 1:]:
            rel = _relation(ge, gt, u, v)
            if rel is not None:
                yield Atom(to_var(u), rel, to_var(v))


@dataclass(frozen=True)
class MonotonicityConstraint:
    """A transition constraint ``src -> tgt`` over ``2n`` nodes.

    ``closed`` records whether the relation rows are the consequence closure.
    ``name`` and ``origin`` are labels (the edge id, and the id of the edge of
    the input system it was derived from); they do not take part in equality.
    """

    n: int
    src: str
    tgt: str
    ge: tuple[int, ...]
    gt: tuple[int, ...]
    bottom: bool = False
    closed: bool = False
    name: str = field(default="", compare=False)
    origin: str = field(default="", compare=False)

    @classmethod
    def from_atoms(
        cls, n: int, atoms: Iterable[Atom], src: str = "f", tgt: str = "f", name: str = ""
    ) -> "MonotonicityConstraint":
        ge = _reflexive(2 * n)
        gt = [0] * (2 * n)
        for atom in atoms:
            for a, b, strict in atom.arcs(n):
                ge[a] |= 1 << b
                if strict:
                    gt[a] |= 1 << b
        return cls(n, src, tgt, tuple(ge), tuple(gt), name=name, origin=name)

    @classmethod
    def bottom_of(cls, n: int, src: str, tgt: str, name: str = "", origin: str = "") -> "MonotonicityConstraint":
        size = 2 * n
        return cls(n, src, tgt, (0,) * size, (0,) * size, True, True, name, origin or name)

    @property
    def cyclic(self) -> bool:
        return self.src == self.tgt

    def relabel(self, *, src=None, tgt=None, name=None, origin=None) -> "MonotonicityConstraint":
        return MonotonicityConstraint(
            self.n,
            self.src if src is None else src,
            self.tgt if tgt is None else tgt,
            self.ge,
            self.gt,
            self.bottom,
            self.closed,
            self.name if name is None else name,
            self.origin if origin is None else origin,
        )

    def relation(self, a: VarNode, b: VarNode) -> str | None:
        if self.bottom:
            return ">"
        return _relation(self.ge, self.gt, a.node(self.n), b.node(self.n))

    def arcs(self) -> list[Arc]:
        """Explicit arcs (no reflexive ones); equalities carry ``no_change``."""
        if self.bottom:
            return []
        n = self.n
        out = []
        for u in range(2 * n):
            for v in range(2 * n):
                if u != v and self.ge[u] >> v & 1:
                    strict = bool(self.gt[u] >> v & 1)
                    back = bool(self.ge[v] >> u & 1)
                    out.append(Arc(_var(u, n), _var(v, n), strict, back and not strict))
        return out

    def atoms(self) -> list[Atom]:
        if self.bottom:
            return []
        n = self.n
        return list(_atoms_of(2 * n, self.ge, self.gt, range(2 * n), lambda u: _var(u, n)))

    def source_projection(self) -> Invariant:
        n = self.n
        mask = (1 << n) - 1
        return Invariant(n, tuple(g & mask for g in self.ge[:n]), tuple(g & mask for g in self.gt[:n]))

    def target_projection(self) -> Invariant:
        n = self.n
        return Invariant(n, tuple(g >> n for g in self.ge[n:]), tuple(g >> n for g in self.gt[n:]))

    def __repr__(self) -> str:
        if self.bottom:
            return f"MC({self.src}->{self.tgt}: ⊥)"
        body = ", ".join(_fmt_atom(a) for a in self.atoms())
        return f"MC({self.src}->{self.tgt}: {body})"


def _var(u: int, n: int) -> VarNode:
    return VarNode(u - n, True) if u >= n else VarNode(u, False)


def _fmt_atom(a: Atom) -> str:
    def t(v: VarNode) -> str:
        return f"x{v.index + 1}" + ("'" if v.primed else "")

    return f"{t(a.lhs)} {a.rel} {t(a.rhs)}"


def _with_invariants(g: MonotonicityConstraint, src_inv: Invariant | None, tgt_inv: Invariant | None):
    n = g.n
    ge, gt = list(g.ge), list(g.gt)
    if src_inv is not None:
        for u in range(n):
            ge[u] |= src_inv.ge[u]
            gt[u] |= src_inv.gt[u]
    if tgt_inv is not None:
        for u in range(n):
            ge[n + u] |= tgt_inv.ge[u] << n
            gt[n + u] |= tgt_inv.gt[u] << n
    return ge, gt


def close(
    constraint: MonotonicityConstraint,
    src_inv: Invariant | None = None,
    tgt_inv: Invariant | None = None,
) -> MonotonicityConstraint:
    """Consequence closure of ``constraint`` together with its endpoint invariants.

    Returns the endpoint pair's bottom value when the conjunction is unsatisfiable.
    """
    if constraint.bottom:
        return constraint
    ge, gt = _with_invariants(constraint, src_inv, tgt_inv)
    if not _close_masks(ge, gt):
        return MonotonicityConstraint.bottom_of(
            constraint.n, constraint.src, constraint.tgt, constraint.name, constraint.origin
        )
    return MonotonicityConstraint(
        constraint.n,
        constraint.src,
        constraint.tgt,
        tuple(ge),
        tuple(gt),
        False,
        True,
        constraint.name,
        constraint.origin,
    )


def is_satisfiable(constraint: MonotonicityConstraint) -> bool:
    if constraint.bottom:
        return False
    if constraint.closed:
        return True
    return not close(constraint).bottom


def entails(constraint: MonotonicityConstraint, atom: Atom) -> bool:
    """``constraint |- atom``; bottom entails everything."""
    if not constraint.closed:
        constraint = close(constraint)
    if constraint.bottom:
        return True
    n = constraint.n
    return _entails(constraint.ge, constraint.gt, atom.lhs.node(n), atom.rel, atom.rhs.node(n))


def compose(g1: MonotonicityConstraint, g2: MonotonicityConstraint) -> MonotonicityConstraint:
    """``g1 ; g2``: the closed constraint between g1's source and g2's target."""
    if g1.tgt != g2.src:
        raise UsageError(f"cannot compose {g1.src}->{g1.tgt} with {g2.src}->{g2.tgt}")
    if g1.n != g2.n:
        raise UsageError("variable counts differ")
    n = g1.n
    if g1.bottom or g2.bottom:
        return MonotonicityConstraint.bottom_of(n, g1.src, g2.tgt)
    if not g1.closed:
        g1 = close(g1)
    if not g2.closed:
        g2 = close(g2)
    # nodes: 0..n-1 source, n..2n-1 middle, 2n..3n-1 target
    ge = list(g1.ge) + [0] * n
    gt = list(g1.gt) + [0] * n
    for u in range(2 * n):
        row_ge = g2.ge[u] << n
        row_gt = g2.gt[u] << n
        ge[n + u] |= row_ge
        gt[n + u] |= row_gt
    if not _close_masks(ge, gt):
        return MonotonicityConstraint.bottom_of(n, g1.src, g2.tgt)
    low = (1 << n) - 1
    high = low << 2 * n

    def project(row: int) -> int:
        return (row & low) | ((row & high) >> n)

    keep = list(range(n)) + list(range(2 * n, 3 * n))
    return MonotonicityConstraint(
        n,
        g1.src,
        g2.tgt,
        tuple(project(ge[u]) for u in keep),
        tuple(project(gt[u]) for u in keep),
        False,
        True,
    )


def collapse(path: Sequence[str], system: "Mcs") -> MonotonicityConstraint:
    """Closed collapse of the multipath along the edge ids in ``path``."""
    if not path:
        raise UsageError("empty multipath")
    edges = [system.edge(e) for e in path]
    for a, b in zip(edges, edges[1:]):
        if a.tgt != b.src:
            raise UsageError(f"broken chain: {a.name} ends at {a.tgt}, {b.name} starts at {b.src}")
    first = close(edges[0], system.points[edges[0].src], system.points[edges[0].tgt])
    return reduce(compose, edges[1:], first)


def canonical_key(constraint: MonotonicityConstraint) -> bytes:
    """Byte encoding of a closed constraint's relation rows (bottom has a reserved key)."""
    if constraint.bottom:
        return BOTTOM_KEY
    if not constraint.closed:
        constraint = close(constraint)
        if constraint.bottom:
            return BOTTOM_KEY
    width = (2 * constraint.n + 7) // 8
    return b"".join(r.to_bytes(width, "little") for r in constraint.ge + constraint.gt)


def reindex(g: MonotonicityConstraint, src_perm: Sequence[int], tgt_perm: Sequence[int]) -> MonotonicityConstraint:
    """Rename variables: new source var ``k`` is old source var ``src_perm[k]`` (likewise target)."""
    if g.bottom:
        return g
    n = g.n
    old = list(src_perm) + [n + j for j in tgt_perm]
    ge, gt = [], []
    for u in range(2 * n):
        rge, rgt = g.ge[old[u]], g.gt[old[u]]
        a = b = 0
        for v in range(2 * n):
            if rge >> old[v] & 1:
                a |= 1 << v
            if rgt >> old[v] & 1:
                b |= 1 << v
        ge.append(a)
        gt.append(b)
    return MonotonicityConstraint(n, g.src, g.tgt, tuple(ge), tuple(gt), False, g.closed, g.name, g.origin)


def multipath_graph(edges: Sequence[MonotonicityConstraint]) -> tuple[int, list[tuple[int, int, bool]]]:
    """Unroll a chain of closed constraints; node ``t * n + i`` is ``x[t, i]``.

    Returns the node count and the list of arcs ``(u, v, strict)`` meaning
    ``u >= v`` (``u > v`` when strict).
    """
    if not edges:
        return 0, []
    n = edges[0].n
    arcs = []
    for t, g in enumerate(edges):
        base = t * n
        for u in range(2 * n):
            for v in range(2 * n):
                if u != v and g.ge[u] >> v & 1:
                    arcs.append((base + u, base + v, bool(g.gt[u] >> v & 1)))
    return (len(edges) + 1) * n, arcs


@dataclass(frozen=True)
class Mcs:
    """A monotonicity constraint transition system.

    ``points`` maps flow-point ids to invariants (insertion order is kept);
    ``edges`` holds the constraints, each closed w.r.t. its endpoint
    invariants.  Edges may be bottom (unsatisfiable).
    """

    names: tuple[str, ...]
    points: Mapping[str, Invariant]
    edges: tuple[MonotonicityConstraint, ...]
    root: str | None = None

    def __post_init__(self):
        n = len(self.names)
        seen = set()
        for g in self.edges:
            if g.n != n:
                raise UsageError(f"edge {g.name} has {g.n} variables, system has {n}")
            if g.src not in self.points or g.tgt not in self.points:
                raise UsageError(f"edge {g.name} references an unknown flow point")
            if g.name in seen:
                raise UsageError(f"duplicate edge id {g.name!r}")
            seen.add(g.name)
        if self.root is not None and self.root not in self.points:
            raise UsageError(f"unknown root {self.root!r}")

    @property
    def n(self) -> int:
        return len(self.names)

    @classmethod
    def build(
        cls,
        names: Sequence[str],
        points: Mapping[str, Invariant] | Iterable[str],
        edges: Iterable[MonotonicityConstraint],
        root: str | None = None,
    ) -> "Mcs":
        """Assemble a system, closing each edge against its endpoint invariants."""
        n = len(names)
        if not isinstance(points, Mapping):
            points = {p: Invariant.top(n) for p in points}
        points = dict(points)
        closed = []
        for k, g in enumerate(edges):
            name = g.name or f"e{k + 1}"
            g = g.relabel(name=name, origin=g.origin or name)
            for p in (g.src, g.tgt):
                points.setdefault(p, Invariant.top(n))
            closed.append(close(g, points[g.src], points[g.tgt]))
        return cls(tuple(names), points, tuple(closed), root)

    def edge(self, name: str) -> MonotonicityConstraint:
        for g in self.edges:
            if g.name == name:
                return g
        raise UsageError(f"unknown edge {name!r}")

    def live_edges(self) -> list[MonotonicityConstraint]:
        return [g for g in self.edges if not g.bottom]

    def successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {p: set() for p in self.points}
        for g in self.live_edges():
            succ[g.src].add(g.tgt)
        return succ

    def replace(self, **changes) -> "Mcs":
        data = dict(names=self.names, points=self.points, edges=self.edges, root=self.root)
        data.update(changes)
        return Mcs(**data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mcs):
            return NotImplemented
        return (
            self.names == other.names
            and dict(self.points) == dict(other.points)
            and list(self.points) == list(other.points)
            and [(g.name, g) for g in self.edges] == [(g.name, g) for g in other.edges]
            and self.root == other.root
        )

    def __hash__(self) -> int:
        return hash((self.names, tuple(self.points), self.edges, self.root))


def sample_solution(ge: Sequence[int], gt: Sequence[int], rng, bound: int = 12, tries: int = 20) -> list[int] | None:
    """Random integer solution of a closed, satisfiable relation within ``[-bound, bound]``.

    Equality classes are placed along a random linear extension with random gaps.
    """
    size = len(ge)
    cls_of = [-1] * size
    classes: list[int] = []
    for u in range(size):
        if cls_of[u] < 0:
            mask = 0
            for v in range(size):
                if ge[u] >> v & 1 and ge[v] >> u & 1:
                    mask |= 1 << v
                    cls_of[v] = len(classes)
            mask |= 1 << u
            cls_of[u] = len(classes)
            classes.append(mask)
    k = len(classes)
    rep = [(c & -c).bit_length() - 1 for c in classes]
    lower = [[d for d in range(k) if d != c and ge[rep[c]] >> rep[d] & 1] for c in range(k)]
    for _ in range(tries):
        val: dict[int, int] = {}
        base = rng.randint(-bound, 0)
        pending = set(range(k))
        ok = True
        while pending:
            ready = sorted(c for c in pending if all(d in val for d in lower[c]))
            c = rng.choice(ready)
            lo = base
            for d in lower[c]:
                lo = max(lo, val[d] + (1 if gt[rep[c]] >> rep[d] & 1 else 0))
            val[c] = lo + rng.choice((0, 0, 1, 1, 2, 3))
            if val[c] > bound:
                ok = False
                break
            pending.discard(c)
        if ok:
            return [val[cls_of[u]] for u in range(size)]
    return None
