"""System transformations: stabilization, elaboration, reachability."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

from .core import (
    Atom,
    Invariant,
    Mcs,
    MonotonicityConstraint,
    UsageError,
    VarNode,
    close,
    reindex,
)

__all__ = [
    "Ordering",
    "PointMapping",
    "enumerate_orderings",
    "ordered_bell",
    "ordering_invariant",
    "ordering_renaming",
    "is_stable",
    "stabilize",
    "fully_elaborate",
    "partial_elaborate",
    "restrict_reachable",
    "to_original_indices",
    "has_downward_closure",
]

# An ordering is a tuple of blocks (frozensets of 0-based indices), ascending by value.
Ordering = tuple


@dataclass(frozen=True)
class PointMapping:
    """``new point -> (original point, renaming)``.

    ``renaming[k]`` is the original index of the variable stored at index ``k``
    of the new point.
    """

    entries: Mapping[str, tuple[str, tuple[int, ...]]]

    def origin(self, point: str) -> str:
        return self.entries[point][0]

    def renaming(self, point: str) -> tuple[int, ...]:
        return self.entries[point][1]

    def copies(self, original: str) -> list[str]:
        return [p for p, (o, _) in self.entries.items() if o == original]

    def then(self, inner: "PointMapping") -> "PointMapping":
        """Compose with a mapping applied afterwards (``inner`` maps into our new points)."""
        out = {}
        for p, (mid, ren) in inner.entries.items():
            orig, ren0 = self.entries[mid]
            out[p] = (orig, tuple(ren0[k] for k in ren))
        return PointMapping(out)

    @classmethod
    def identity(cls, system: Mcs) -> "PointMapping":
        ident = tuple(range(system.n))
        return cls({p: (p, ident) for p in system.points})


def enumerate_orderings(n: int) -> list[Ordering]:
    """All ordered partitions of ``{0..n-1}`` (blocks listed ascending by value)."""
    if n < 1:
        raise UsageError("need at least one variable")

    def rec(items: tuple[int, ...]) -> list[Ordering]:
        if not items:
            return [()]
        out = []
        # choose the lowest block as a nonempty subset
        m = len(items)
        for mask in range(1, 1 << m):
            block = frozenset(items[k] for k in range(m) if mask >> k & 1)
            rest = tuple(x for x in items if x not in block)
            for tail in rec(rest):
                out.append((block,) + tail)
        return out

    return rec(tuple(range(n)))


def ordered_bell(n: int) -> int:
    """Ordered Bell number via the binomial recurrence."""
    from math import comb

    b = [1]
    for m in range(1, n + 1):
        b.append(sum(comb(m, k) * b[m - k] for k in range(1, m + 1)))
    return b[n]


def ordering_invariant(n: int, ordering: Ordering) -> Invariant:
    """The ordering as an invariant over the original indices."""
    atoms = []
    for a, block in enumerate(ordering):
        items = sorted(block)
        for u, v in zip(items, items[1:]):
            atoms.append(Atom(VarNode(u), "=", VarNode(v)))
        if a + 1 < len(ordering):
            atoms.append(Atom(VarNode(items[0]), "<", VarNode(min(ordering[a + 1]))))
    return Invariant.from_atoms(n, atoms)


def ordering_renaming(ordering: Ordering) -> tuple[int, ...]:
    """Sorted position -> original index, ties broken by original index."""
    return tuple(i for block in ordering for i in sorted(block))


def _chain_invariant(n: int, ordering: Ordering) -> Invariant:
    """Invariant ``x_1 {<,=} x_2 ... x_n`` over re-indexed variables."""
    atoms = []
    pos = 0
    for a, block in enumerate(ordering):
        for _ in range(len(block) - 1):
            atoms.append(Atom(VarNode(pos), "=", VarNode(pos + 1)))
            pos += 1
        if a + 1 < len(ordering):
            atoms.append(Atom(VarNode(pos), "<", VarNode(pos + 1)))
            pos += 1
    return Invariant.from_atoms(n, atoms)


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    k = 1
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    taken.add(name)
    return name


def is_stable(system: Mcs) -> bool:
    """Every MC satisfiable and its endpoint projections entailed by the invariants."""
    for g in system.edges:
        if g.bottom:
            return False
        if not system.points[g.src].implies(g.source_projection()):
            return False
        if not system.points[g.tgt].implies(g.target_projection()):
            return False
    return True


def _undecided_split(inv: Invariant, proj: Invariant) -> tuple[int, int] | None:
    n = inv.n
    for i in range(n):
        for j in range(i + 1, n):
            if proj.relation(i, j) != inv.relation(i, j):
                return i, j
    return None


def _pair_cases(inv: Invariant, i: int, j: int) -> list[Invariant]:
    out = []
    for rel in ("<", "=", ">"):
        case = inv.conjoin(Invariant.from_atoms(inv.n, [Atom(VarNode(i), rel, VarNode(j))]))
        if case is not None:
            out.append(case)
    return out


def _split(
    points: dict[str, Invariant],
    edges: list[MonotonicityConstraint],
    point: str,
    cases: Sequence[Invariant],
    names: Sequence[str],
) -> tuple[dict[str, Invariant], list[MonotonicityConstraint]]:
    """Replace ``point`` by copies ``names`` with invariants ``cases``."""
    new_points: dict[str, Invariant] = {}
    for p, inv in points.items():
        if p == point:
            new_points.update(zip(names, cases))
        else:
            new_points[p] = inv
    new_edges = []
    for g in edges:
        srcs = list(names) if g.src == point else [g.src]
        tgts = list(names) if g.tgt == point else [g.tgt]
        for s, t in product(srcs, tgts):
            h = close(g.relabel(src=s, tgt=t), new_points[s], new_points[t])
            if not h.bottom:
                new_edges.append(h)
    return new_points, new_edges


def _finish(
    system: Mcs,
    points: dict[str, Invariant],
    edges: list[MonotonicityConstraint],
    origin_of: dict[str, str],
    renaming_of: Mapping[str, tuple[int, ...]] | None = None,
    fixed: Mapping[str, str] | None = None,
) -> tuple[Mcs, PointMapping]:
    """Give copies readable unique names and build the mapping."""
    by_orig: dict[str, list[str]] = {}
    rename: dict[str, str] = dict(fixed or {})
    for p in points:
        if p not in rename:
            by_orig.setdefault(origin_of[p], []).append(p)
    # a single surviving copy keeps the original name
    for orig, ps in by_orig.items():
        if len(ps) == 1:
            rename[ps[0]] = orig
    taken = set(rename.values()) | set(system.points)
    for orig, ps in by_orig.items():
        if len(ps) > 1:
            for k, p in enumerate(ps, 1):
                rename[p] = _fresh(f"{orig}_{k}", taken)
    new_points = {rename[p]: inv for p, inv in points.items()}
    counts: dict[str, int] = {}
    for g in edges:
        counts[g.origin] = counts.get(g.origin, 0) + 1
    used = {g.origin for g in edges if counts[g.origin] == 1}
    used |= {g.name for g in system.edges}
    seen: dict[str, int] = {}
    final_edges = []
    for g in edges:
        if counts[g.origin] == 1:
            name = g.origin
        else:
            seen[g.origin] = seen.get(g.origin, 0) + 1
            name = _fresh(f"{g.origin}_{seen[g.origin]}", used)
        final_edges.append(g.relabel(src=rename[g.src], tgt=rename[g.tgt], name=name))
    ident = tuple(range(system.n))
    entries = {
        rename[p]: (origin_of[p], (renaming_of or {}).get(p, ident)) for p in points
    }
    out = Mcs(system.names, new_points, tuple(final_edges), None)
    return out, PointMapping(entries)


def stabilize(system: Mcs) -> tuple[Mcs, PointMapping]:
    """Split flow points until every MC's endpoint projections are entailed by the invariants.

    Each round picks the first MC (in order) whose source or target projection
    decides a variable pair more sharply than the endpoint invariant, and splits
    that endpoint three ways on the pair (``<``, ``=``, ``>``).
    """
    points = dict(system.points)
    edges = [g for g in system.edges if not g.bottom]
    origin_of = {p: p for p in points}
    counter = 0
    while True:
        target = None
        for g in edges:
            for side, point, proj in (
                ("src", g.src, g.source_projection()),
                ("tgt", g.tgt, g.target_projection()),
            ):
                pair = _undecided_split(points[point], proj)
                if pair is not None:
                    target = (point, pair)
                    break
            if target:
                break
        if target is None:
            break
        point, (i, j) = target
        cases = _pair_cases(points[point], i, j)
        names = []
        for _ in cases:
            counter += 1
            names.append(f"#{counter}")
            origin_of[names[-1]] = origin_of[point]
        points, edges = _split(points, edges, point, cases, names)
    result, mapping = _finish(system, points, edges, origin_of)
    if system.root is not None:
        copies = mapping.copies(system.root)
        if len(copies) == 1:
            result = result.replace(root=copies[0])
    return result, mapping


def fully_elaborate(system: Mcs, root: str | Iterable[str] | None = None) -> tuple[Mcs, PointMapping]:
    """Split every point by all total preorders of the variables and re-index ascending.

    With ``root`` given, only copies reachable from the root's copies are generated.
    """
    n = system.n
    if n == 0:
        return system, PointMapping.identity(system)
    orderings = enumerate_orderings(n)
    copies: dict[str, list[tuple[str, Invariant, tuple[int, ...]]]] = {}
    origin_of: dict[str, str] = {}
    renaming_of: dict[str, tuple[int, ...]] = {}
    chain_of: dict[str, Invariant] = {}
    for p, inv in system.points.items():
        lst = []
        for k, ordering in enumerate(orderings, 1):
            if inv.conjoin(ordering_invariant(n, ordering)) is None:
                continue
            name = f"{p}#{k}"
            ren = ordering_renaming(ordering)
            lst.append((name, _chain_invariant(n, ordering), ren))
            origin_of[name] = p
            renaming_of[name] = ren
            chain_of[name] = lst[-1][1]
        copies[p] = lst

    outgoing: dict[str, list[MonotonicityConstraint]] = {}
    for g in system.live_edges():
        outgoing.setdefault(g.src, []).append(g)

    def expand(name: str) -> list[MonotonicityConstraint]:
        orig = origin_of[name]
        out = []
        for g in outgoing.get(orig, []):
            for tname, tinv, tren in copies[g.tgt]:
                h = reindex(g.relabel(src=name, tgt=tname), renaming_of[name], tren)
                h = close(h, chain_of[name], tinv)
                if not h.bottom:
                    out.append(h)
        return out

    if root is None:
        keep = [name for p in system.points for name, _, _ in copies[p]]
        edges = [h for name in keep for h in expand(name)]
    else:
        roots = [root] if isinstance(root, str) else list(root)
        for r in roots:
            if r not in system.points:
                raise UsageError(f"unknown root {r!r}")
        start = [name for r in roots for name, _, _ in copies[r]]
        reached = set(start)
        queue = deque(start)
        by_src: dict[str, list[MonotonicityConstraint]] = {}
        while queue:
            name = queue.popleft()
            by_src[name] = expand(name)
            for h in by_src[name]:
                if h.tgt not in reached:
                    reached.add(h.tgt)
                    queue.append(h.tgt)
        keep = [name for p in system.points for name, _, _ in copies[p] if name in reached]
        edges = [h for name in keep for h in by_src[name]]
    points = {name: chain_of[name] for name in keep}
    result, mapping = _finish(system, points, edges, origin_of, renaming_of)
    if root is not None:
        roots = [root] if isinstance(root, str) else list(root)
        rc = [c for r in roots for c in mapping.copies(r)]
        if len(rc) == 1:
            result = result.replace(root=rc[0])
    elif system.root is not None:
        rc = mapping.copies(system.root)
        if len(rc) == 1:
            result = result.replace(root=rc[0])
    return result, mapping


def to_original_indices(system: Mcs, mapping: PointMapping) -> Mcs:
    """Undo per-point re-indexing so every point uses the original variable order."""
    n = system.n

    def inverse(ren):
        inv = [0] * n
        for k, i in enumerate(ren):
            inv[i] = k
        return tuple(inv)

    points = {}
    for p, inv in system.points.items():
        back = inverse(mapping.renaming(p))
        ge = [0] * n
        gt = [0] * n
        for i in range(n):
            for j in range(n):
                if inv.ge[back[i]] >> back[j] & 1:
                    ge[i] |= 1 << j
                if inv.gt[back[i]] >> back[j] & 1:
                    gt[i] |= 1 << j
        points[p] = Invariant(n, tuple(ge), tuple(gt))
    edges = tuple(
        reindex(g, inverse(mapping.renaming(g.src)), inverse(mapping.renaming(g.tgt)))
        for g in system.edges
    )
    return Mcs(system.names, points, edges, system.root)


def has_downward_closure(g: MonotonicityConstraint) -> bool:
    """For all k<j: G |- x_i >= x'_j implies G |- x_i >= x'_k."""
    if g.bottom:
        return True
    n = g.n
    for i in range(2 * n):
        row = g.ge[i] >> n
        for j in range(n):
            if row >> j & 1:
                for k in range(j):
                    if not row >> k & 1:
                        return False
    return True


def _order_types(k: int):
    """All weak orders of ``k`` items as value tuples."""
    for ordering in enumerate_orderings(k):
        vals = [0] * k
        for rank, block in enumerate(ordering):
            for i in block:
                vals[i] = rank
        yield vals


def _holds(inv: Invariant, vals: Sequence[int], vars_: Sequence[int]) -> bool:
    pos = {v: a for a, v in enumerate(vars_)}
    for u in vars_:
        for v in vars_:
            if u == v:
                continue
            if inv.gt[u] >> v & 1 and not vals[pos[u]] > vals[pos[v]]:
                return False
            if inv.ge[u] >> v & 1 and not vals[pos[u]] >= vals[pos[v]]:
                return False
    return True


def partial_elaborate(
    system: Mcs,
    point: str,
    cases: Sequence[Invariant],
    names: Sequence[str] | None = None,
) -> tuple[Mcs, PointMapping]:
    """Split ``point`` into one copy per case; incident MCs are replicated and re-closed.

    Cases must each extend the point invariant and be pairwise contradictory.
    Coverage is checked by enumerating order types of the variables the cases
    constrain, when there are at most six of them.
    """
    if point not in system.points:
        raise UsageError(f"unknown flow point {point!r}")
    if not cases:
        raise UsageError("no cases given")
    base = system.points[point]
    for c in cases:
        if c.n != system.n or not c.implies(base):
            raise UsageError("every case must extend the point invariant")
    for a in range(len(cases)):
        for b in range(a + 1, len(cases)):
            if cases[a].conjoin(cases[b]) is not None:
                raise UsageError("cases are not mutually exclusive")
    involved = sorted(
        {
            u
            for c in cases
            for u in range(system.n)
            for v in range(system.n)
            if c.relation(u, v) != base.relation(u, v)
            for u in (u, v)
        }
    )
    if len(involved) <= 6:
        for vals in _order_types(len(involved)):
            if _holds(base, vals, involved) and not any(_holds(c, vals, involved) for c in cases):
                raise UsageError("cases do not cover the point invariant")
    internal = [f"#{k}" for k in range(1, len(cases) + 1)]
    fixed = None
    if names is not None:
        if len(names) != len(cases) or len(set(names)) != len(names):
            raise UsageError("need one distinct name per case")
        clash = set(names) & (set(system.points) - {point})
        if clash:
            raise UsageError(f"copy names already in use: {sorted(clash)}")
        fixed = dict(zip(internal, names))
    points, edges = _split(dict(system.points), list(system.live_edges()), point, list(cases), internal)
    origin_of = {p: p for p in system.points}
    for nm in internal:
        origin_of[nm] = point
    return _finish(system, points, edges, origin_of, fixed=fixed)


def restrict_reachable(system: Mcs, roots: str | Iterable[str]) -> Mcs:
    """Sub-system induced by the points reachable from ``roots``."""
    roots = [roots] if isinstance(roots, str) else list(roots)
    for r in roots:
        if r not in system.points:
            raise UsageError(f"unknown root {r!r}")
    succ = system.successors()
    seen = set(roots)
    queue = deque(roots)
    while queue:
        p = queue.popleft()
        for q in sorted(succ[p]):
            if q not in seen:
                seen.add(q)
                queue.append(q)
    points = {p: inv for p, inv in system.points.items() if p in seen}
    edges = tuple(g for g in system.edges if g.src in seen and not g.bottom)
    root = system.root if system.root in seen else None
    return Mcs(system.names, points, edges, root)
