"""Brute-force cross-checks used by the test-suite and the ``selfcheck`` command.

Nothing here reuses the bitmask closure of :mod:`mcsterm.core`; collapses are
computed with a separate min-plus shortest-path pass so the two can be
compared.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import (
    Atom,
    Invariant,
    Mcs,
    MonotonicityConstraint,
    UsageError,
    VarNode,
    canonical_key,
)
from .termination import Assignment, Verdict

__all__ = [
    "enumerate_collapses",
    "collapses_saturate",
    "walk_oracle",
    "WalkReport",
    "sct_difference_oracle",
    "concrete_prefix_check",
    "CorpusSpec",
    "random_corpus",
    "path_correspondence",
]

INF = 1


# ----------------------------------------------------------------------------
# collapses by enumeration


def _weights(g: MonotonicityConstraint) -> list[list[int]]:
    """``w[u][v]`` is 0 for ``u >= v``, -1 for ``u > v``, INF (=1) for no arc."""
    size = 2 * g.n
    w = [[INF] * size for _ in range(size)]
    for u in range(size):
        w[u][u] = 0
        for v in range(size):
            if g.gt[u] >> v & 1:
                w[u][v] = -1
            elif g.ge[u] >> v & 1:
                w[u][v] = min(w[u][v], 0)
    return w


def _floyd(w: list[list[int]]) -> bool:
    """In-place min-plus closure with weights clamped to {-1, 0, INF}; False on a strict cycle."""
    size = len(w)
    for k in range(size):
        wk = w[k]
        for u in range(size):
            a = w[u][k]
            if a == INF:
                continue
            wu = w[u]
            for v in range(size):
                b = wk[v]
                if b != INF and max(a + b, -1) < wu[v]:
                    wu[v] = max(a + b, -1)
    return all(w[u][u] == 0 for u in range(size))


def _join(g1: MonotonicityConstraint, g2: MonotonicityConstraint) -> MonotonicityConstraint:
    """Collapse of the two-edge multipath ``g1 g2``."""
    n = g1.n
    if g1.bottom or g2.bottom:
        return MonotonicityConstraint.bottom_of(n, g1.src, g2.tgt)
    size = 3 * n
    w = [[INF] * size for _ in range(size)]
    for u in range(size):
        w[u][u] = 0
    for off, g in ((0, g1), (n, g2)):
        gw = _weights(g)
        for u in range(2 * n):
            for v in range(2 * n):
                w[off + u][off + v] = min(w[off + u][off + v], gw[u][v])
    if not _floyd(w):
        return MonotonicityConstraint.bottom_of(n, g1.src, g2.tgt)
    keep = list(range(n)) + list(range(2 * n, 3 * n))
    ge, gt = [], []
    for u in keep:
        a = b = 0
        for k, v in enumerate(keep):
            if w[u][v] <= 0:
                a |= 1 << k
            if w[u][v] < 0:
                b |= 1 << k
        ge.append(a)
        gt.append(b)
    return MonotonicityConstraint(n, g1.src, g2.tgt, tuple(ge), tuple(gt), False, True)


def collapses_saturate(system: Mcs, max_len: int = 10) -> tuple[set, bool]:
    """Satisfiable path collapses up to ``max_len`` edges, and whether the last length added nothing."""
    if not 0 <= max_len <= 10:
        raise UsageError("max_len must lie in 0..10")
    found: dict[tuple, MonotonicityConstraint] = {}
    layer: dict[tuple, MonotonicityConstraint] = {}
    live = system.live_edges()
    for g in live:
        key = (g.src, g.tgt, canonical_key(g))
        layer.setdefault(key, g)
    saturated = not layer
    for length in range(1, max_len + 1):
        new = {k: v for k, v in layer.items() if k not in found}
        found.update(new)
        if not new:
            saturated = True
            break
        if length == max_len:
            break
        nxt: dict[tuple, MonotonicityConstraint] = {}
        for mc in layer.values():
            for g in live:
                if g.src != mc.tgt:
                    continue
                h = _join(mc, g)
                if h.bottom:
                    continue
                nxt.setdefault((h.src, h.tgt, canonical_key(h)), h)
        layer = nxt
        if not layer:
            saturated = True
            break
    plain = {mc.relabel(name="", origin="") for mc in found.values()}
    return plain, saturated


def enumerate_collapses(system: Mcs, max_len: int = 10) -> set:
    """Collapses (satisfiable ones only) of every CFG path of 1..``max_len`` edges."""
    return collapses_saturate(system, max_len)[0]


# ----------------------------------------------------------------------------
# closed walks of the circular variant


@dataclass
class WalkReport:
    """Closed walks found per start node.

    ``forward``/``backward`` hold walks using only ``x' -> x`` (resp. ``x -> x'``)
    shortcuts; ``negative``/``positive`` hold any walk with that net balance.
    Values are ``True`` when some such walk is strict.
    """

    n: int
    forward: dict = field(default_factory=dict)
    backward: dict = field(default_factory=dict)
    negative: dict = field(default_factory=dict)
    positive: dict = field(default_factory=dict)
    balanced_strict: bool = False
    reach: list = field(default_factory=list)
    ge: tuple = ()

    @staticmethod
    def _joined(src: dict, dst: dict, link) -> bool:
        for u, us in src.items():
            for v, vs in dst.items():
                if (us or vs) and link(u, v):
                    return True
        return False

    @property
    def stable_pass(self) -> bool:
        """Forward and backward cycle joined by one arc, one of them strict."""
        return self._joined(self.forward, self.backward, lambda u, v: self.ge[u] >> v & 1)

    @property
    def general_pass(self) -> bool:
        return self.balanced_strict or self._joined(
            self.negative, self.positive, lambda u, v: self.reach[u] >> v & 1
        )


def walk_oracle(g: MonotonicityConstraint, max_walk_len: int = 8) -> WalkReport:
    """Enumerate closed walks of length up to ``max_walk_len`` in the circular variant of ``g``."""
    if not 1 <= max_walk_len <= 8:
        raise UsageError("max_walk_len must lie in 1..8")
    if not g.cyclic:
        raise UsageError("walks need a cyclic MC")
    n = g.n
    size = 2 * n
    if g.bottom:
        return WalkReport(n, balanced_strict=True, reach=[0] * size, ge=(0,) * size)
    # moves: (target, balance step, strict, kind) with kind 0 base, 1 x->x', 2 x'->x
    moves: list[list[tuple[int, int, bool, int]]] = [[] for _ in range(size)]
    for u in range(size):
        for v in range(size):
            if u != v and g.ge[u] >> v & 1:
                moves[u].append((v, 0, bool(g.gt[u] >> v & 1), 0))
    for i in range(n):
        moves[i].append((n + i, 1, False, 1))
        moves[n + i].append((i, -1, False, 2))
    rep = WalkReport(n, ge=g.ge)
    for s in range(size):
        states = {(s, 0, False, 0)}
        for _ in range(max_walk_len):
            nxt = set()
            for u, bal, strict, used in states:
                for v, db, st, kind in moves[u]:
                    nxt.add((v, bal + db, strict or st, used | (1 << kind if kind else 0)))
            states = nxt
            for u, bal, strict, used in states:
                if u != s:
                    continue
                if used == 0b100:
                    rep.forward[s] = rep.forward.get(s, False) or strict
                if used == 0b010:
                    rep.backward[s] = rep.backward.get(s, False) or strict
                if bal < 0:
                    rep.negative[s] = rep.negative.get(s, False) or strict
                if bal > 0:
                    rep.positive[s] = rep.positive.get(s, False) or strict
                if bal == 0 and strict:
                    rep.balanced_strict = True
    reach = [1 << u for u in range(size)]
    frontier = True
    while frontier:
        frontier = False
        for u in range(size):
            r = reach[u]
            for v, *_ in moves[u]:
                r |= reach[v]
            if r != reach[u]:
                reach[u] = r
                frontier = True
    rep.reach = reach
    return rep


# ----------------------------------------------------------------------------
# size-change termination over difference variables


def _sct_compose(a: frozenset, b: frozenset) -> frozenset:
    best: dict[tuple[int, int], bool] = {}
    for x, y, s1 in a:
        for y2, z, s2 in b:
            if y == y2:
                best[(x, z)] = best.get((x, z), False) or s1 or s2
    return frozenset((x, z, s) for (x, z), s in best.items())


def sct_difference_oracle(system: Mcs, root: str | None = None) -> Verdict:
    """Decide termination by classical size-change closure over the difference variables."""
    from .ranking import build_difference_mcs
    from .transform import fully_elaborate

    if system.n == 0:
        graphs = {(g.src, g.tgt, frozenset()) for g in system.live_edges()}
    else:
        elab, _ = fully_elaborate(system, root=root)
        d = build_difference_mcs(elab)
        graphs = set()
        for g in d.system.live_edges():
            arcs = []
            for a in d.pairs:
                for b in d.pairs:
                    if d.entails_ge(g, a, b):
                        arcs.append((a, b, d.entails_ge(g, a, b, strict=True)))
            graphs.add((g.src, g.tgt, frozenset(arcs)))
    closure = set(graphs)
    work = list(closure)
    while work:
        f, t, arcs = work.pop()
        for f2, t2, arcs2 in list(closure):
            for item in ((f, t2, _sct_compose(arcs, arcs2)) if t == f2 else None,
                         (f2, t, _sct_compose(arcs2, arcs)) if t2 == f else None):
                if item is not None and item not in closure:
                    closure.add(item)
                    work.append(item)
    for f, t, arcs in closure:
        if f != t or _sct_compose(arcs, arcs) != arcs:
            continue
        if not any(x == y and s for x, y, s in arcs):
            return Verdict(False, "sct-difference", root)
    return Verdict(True, "sct-difference", root)


# ----------------------------------------------------------------------------
# concrete runs


def concrete_prefix_check(mp: Sequence[str], system: Mcs, a: Assignment | Sequence[Sequence[int]]) -> bool:
    """True iff the states in ``a`` satisfy every atom along the edge path ``mp``."""
    rows = a.rows if isinstance(a, Assignment) else a
    if len(mp) and len(rows) < len(mp) + 1:
        return False
    ops = {
        ">": lambda x, y: x > y,
        ">=": lambda x, y: x >= y,
        "=": lambda x, y: x == y,
        "<": lambda x, y: x < y,
        "<=": lambda x, y: x <= y,
    }
    for t, name in enumerate(mp):
        g = system.edge(name)
        if g.bottom:
            return False
        for inv, row in ((system.points[g.src], rows[t]), (system.points[g.tgt], rows[t + 1])):
            for atom in inv.atoms():
                if not ops[atom.rel](row[atom.lhs.index], row[atom.rhs.index]):
                    return False
        for atom in g.atoms():
            x = rows[t + atom.lhs.primed][atom.lhs.index]
            y = rows[t + atom.rhs.primed][atom.rhs.index]
            if not ops[atom.rel](x, y):
                return False
    return True


# ----------------------------------------------------------------------------
# random systems


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    count: int = 1000
    max_vars: int = 3
    max_points: int = 2
    max_mcs: int = 3
    density: float = 0.45

    def __post_init__(self):
        if not 1 <= self.max_vars <= 3:
            raise UsageError("max_vars must lie in 1..3")
        if not 1 <= self.max_points <= 2:
            raise UsageError("max_points must lie in 1..2")
        if not 1 <= self.max_mcs <= 3:
            raise UsageError("max_mcs must lie in 1..3")
        if not 0.0 <= self.density <= 1.0:
            raise UsageError("density must lie in [0, 1]")
        if self.count < 0:
            raise UsageError("count must be non-negative")


_RELS = (">", ">=", "=", ">", ">=")


def _random_atoms(rng: random.Random, n: int, primed: bool, density: float) -> list[Atom]:
    nodes = [VarNode(i) for i in range(n)] + ([VarNode(i, True) for i in range(n)] if primed else [])
    out = []
    for k, u in enumerate(nodes):
        for v in nodes[k + 1:]:
            if rng.random() < density:
                a, b = (u, v) if rng.random() < 0.5 else (v, u)
                out.append(Atom(a, rng.choice(_RELS), b))
    return out


def random_corpus(spec: CorpusSpec = CorpusSpec()) -> list[Mcs]:
    """Reproducible random systems; edges are closed, unsatisfiable ones are kept."""
    rng = random.Random(spec.seed)
    out = []
    while len(out) < spec.count:
        n = rng.randint(1, spec.max_vars)
        names = tuple(f"x{i + 1}" for i in range(n))
        points = [f"p{k}" for k in range(rng.randint(1, spec.max_points))]
        invs = {}
        for p in points:
            atoms = _random_atoms(rng, n, False, spec.density / 3)
            inv = None
            try:
                inv = Invariant.from_atoms(n, atoms)
            except UsageError:
                inv = Invariant.top(n)
            invs[p] = inv
        edges = []
        for k in range(rng.randint(1, spec.max_mcs)):
            src = rng.choice(points)
            tgt = src if rng.random() < 0.6 else rng.choice(points)
            atoms = _random_atoms(rng, n, True, spec.density)
            edges.append(MonotonicityConstraint.from_atoms(n, atoms, src, tgt, name=f"g{k + 1}"))
        out.append(Mcs.build(names, invs, edges))
    return out


# ----------------------------------------------------------------------------
# transformed systems against the original


def _order_types(size: int):
    """All weak orders of ``size`` items as value tuples."""

    def rec(k: int):
        if k == 0:
            yield ()
            return
        for rest in rec(k - 1):
            top = max(rest) if rest else -1
            for v in range(top + 2):
                yield rest + (v,)

    seen = set()
    for t in rec(size):
        # normalise to dense ranks
        ranks = {v: r for r, v in enumerate(sorted(set(t)))}
        key = tuple(ranks[v] for v in t)
        if key not in seen:
            seen.add(key)
            yield key


def _satisfied(g: MonotonicityConstraint, vals: Sequence[int]) -> bool:
    if g.bottom:
        return False
    size = 2 * g.n
    for u in range(size):
        for v in range(size):
            if g.gt[u] >> v & 1 and not vals[u] > vals[v]:
                return False
            if g.ge[u] >> v & 1 and not vals[u] >= vals[v]:
                return False
    return True


def _paths(system: Mcs, length: int) -> Iterable[tuple[str, ...]]:
    out_edges: dict[str, list[MonotonicityConstraint]] = {}
    for g in system.live_edges():
        out_edges.setdefault(g.src, []).append(g)

    def rec(path: tuple, at: str, k: int):
        if k == 0:
            yield path
            return
        for g in out_edges.get(at, []):
            yield from rec(path + (g.name,), g.tgt, k - 1)

    for p in system.points:
        yield from rec((), p, length)


def path_correspondence(original: Mcs, transformed: Mcs, mapping, length: int) -> bool:
    """Paths of ``transformed`` mirror paths of ``original`` up to ``length`` edges.

    Every transformed path follows the origins of its edges to an original path
    whose collapse it strengthens (after undoing the variable renaming), and for
    each original path the collapses of its transformed copies together cover
    the original collapse on every order type of the ``2n`` endpoint values.
    """
    from .core import collapse, reindex

    n = original.n
    by_origin: dict[tuple, list] = {}
    for k in range(1, length + 1):
        for path in _paths(transformed, k):
            orig = tuple(transformed.edge(e).origin for e in path)
            h = collapse(path, transformed)
            if h.bottom:
                continue
            first = transformed.edge(path[0]).src
            last = transformed.edge(path[-1]).tgt
            src_ren, tgt_ren = mapping.renaming(first), mapping.renaming(last)
            inv_s = [0] * n
            inv_t = [0] * n
            for k2, i in enumerate(src_ren):
                inv_s[i] = k2
            for k2, i in enumerate(tgt_ren):
                inv_t[i] = k2
            back = reindex(h, inv_s, inv_t)
            try:
                g = collapse(orig, original)
            except Exception:
                return False
            if g.bottom:
                return False
            if any(a & ~b for a, b in zip(g.ge + g.gt, back.ge + back.gt)):
                return False
            by_origin.setdefault(orig, []).append(back)
    for k in range(1, length + 1):
        for path in _paths(original, k):
            g = collapse(path, original)
            if g.bottom:
                continue
            copies = by_origin.get(path, [])
            for vals in _order_types(2 * n):
                if _satisfied(g, vals) and not any(_satisfied(h, vals) for h in copies):
                    return False
    return True
