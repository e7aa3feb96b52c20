"""Lexicographic ranking functions over variable differences.

A fully elaborated system (every point totally orders its variables, re-indexed
ascending) is extended with one variable per pair ``(i, j)``, ``i < j``,
standing for ``x_j - x_i``.  Ranking components are found as singleton thread
preservers of these difference variables; each one is then frozen and the
search repeats on the residual system.

Pair indices here are 0-based positions in the elaborated order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .core import (
    Atom,
    Invariant,
    InvariantViolation,
    Mcs,
    MonotonicityConstraint,
    UsageError,
    VarNode,
    close,
    reindex,
    sample_solution,
)
from .transform import (
    Ordering,
    PointMapping,
    enumerate_orderings,
    fully_elaborate,
    ordering_renaming,
    partial_elaborate,
)

__all__ = [
    "DiffIndex",
    "join",
    "contains",
    "DifferenceMcs",
    "Diff",
    "Case",
    "RankingFunction",
    "build_difference_mcs",
    "mtp",
    "singleton_tp",
    "freeze_residual",
    "regions",
    "rank_scc",
    "rank_system",
    "synthesize_ranking",
    "verify_ranking",
    "check_ranking",
    "CheckResult",
    "MUTATIONS",
    "mutate",
]

DiffIndex = tuple  # (i, j) with i < j


def join(a: DiffIndex, b: DiffIndex) -> DiffIndex:
    """Smallest interval containing both."""
    return (min(a[0], b[0]), max(a[1], b[1]))


def contains(outer: DiffIndex, inner: DiffIndex) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def _pairs(n: int) -> tuple[DiffIndex, ...]:
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


# ----------------------------------------------------------------------------
# difference systems


@dataclass(frozen=True)
class DifferenceMcs:
    """A system over original variables ``V`` plus difference variables ``W``.

    ``system`` has ``n + len(pairs)`` variables; difference ``pairs[p]`` is
    variable ``n + p``.  ``guards[f]`` lists the comparisons between
    difference variables added by splitting, ``base[f]`` the elaborated point
    each point descends from, and ``lineage[f]`` every name ``f`` descends from.
    """

    system: Mcs
    n: int
    pairs: tuple[DiffIndex, ...]
    freezers: tuple[Mapping[str, int], ...] = ()
    base: Mapping[str, str] = field(default_factory=dict)
    guards: Mapping[str, tuple[tuple[DiffIndex, str, DiffIndex], ...]] = field(default_factory=dict)
    lineage: Mapping[str, frozenset] = field(default_factory=dict)
    used: frozenset = frozenset()

    @property
    def size(self) -> int:
        return self.n + len(self.pairs)

    def var(self, pair: DiffIndex) -> int:
        return self.n + self.pairs.index(pair)

    def entails_ge(self, g: MonotonicityConstraint, a: DiffIndex, b: DiffIndex, strict: bool = False) -> bool:
        """``g |- x_a >= x'_b`` (or ``>``)."""
        if g.bottom:
            return True
        N = self.size
        u, v = self.var(a), N + self.var(b)
        rows = g.gt if strict else g.ge
        return bool(rows[u] >> v & 1)

    def restrict(self, points: Iterable[str]) -> "DifferenceMcs":
        keep = set(points)
        sys_ = Mcs(
            self.system.names,
            {p: inv for p, inv in self.system.points.items() if p in keep},
            tuple(g for g in self.system.edges if g.src in keep and g.tgt in keep),
            None,
        )
        return replace(
            self,
            system=sys_,
            freezers=tuple({p: c for p, c in fz.items() if p in keep} for fz in self.freezers),
        )

    def vacant(self) -> bool:
        return not self.system.live_edges()


def _delta_invariant(
    n: int,
    pairs: Sequence[DiffIndex],
    vinv: Invariant,
    extra: Iterable[tuple[DiffIndex, str, DiffIndex]] = (),
) -> Invariant | None:
    """Point invariant over ``V + W``: the ``V`` part, the containment rule, and ``extra``."""
    N = n + len(pairs)
    ge = [0] * N
    gt = [0] * N
    for u in range(n):
        ge[u] = vinv.ge[u]
        gt[u] = vinv.gt[u]
    for a, (i, j) in enumerate(pairs):
        for b, (lo, hi) in enumerate(pairs):
            # x_i <= x_lo and x_hi <= x_j  =>  x_(lo,hi) <= x_(i,j)
            if vinv.ge[lo] >> i & 1 and vinv.ge[j] >> hi & 1:
                ge[n + a] |= 1 << (n + b)
    index = {p: n + k for k, p in enumerate(pairs)}
    for a, rel, b in extra:
        atom = Atom(VarNode(index[a]), rel, VarNode(index[b]))
        for u, v, strict in atom.arcs(N):
            ge[u] |= 1 << v
            if strict:
                gt[u] |= 1 << v
    return Invariant.from_masks(N, ge, gt)


def _derive(
    n: int,
    pairs: Sequence[DiffIndex],
    v: MonotonicityConstraint,
    src_inv: Invariant,
    tgt_inv: Invariant,
    name: str = "",
    origin: str = "",
    extra: Iterable[tuple[int, int, bool]] = (),
) -> MonotonicityConstraint:
    """Difference MC from a closed MC ``v`` over ``V`` and the two point invariants over ``V + W``.

    ``extra`` holds additional arcs ``(u, v, strict)`` over the ``2N`` nodes.
    """
    N = n + len(pairs)
    if v.bottom:
        return MonotonicityConstraint.bottom_of(N, v.src, v.tgt, name, origin)
    ge = [0] * (2 * N)
    gt = [0] * (2 * N)

    def node(u: int) -> int:
        return u if u < n else N + (u - n)

    for u in range(2 * n):
        for w in range(2 * n):
            if v.ge[u] >> w & 1:
                ge[node(u)] |= 1 << node(w)
                if v.gt[u] >> w & 1:
                    gt[node(u)] |= 1 << node(w)
    for a, (i, j) in enumerate(pairs):
        for b, (lo, hi) in enumerate(pairs):
            # x_i <= x'_lo, x'_hi <= x_j  =>  x'_(lo,hi) <= x_(i,j)
            if v.ge[n + lo] >> i & 1 and v.ge[j] >> (n + hi) & 1:
                s, t = n + a, N + n + b
                ge[s] |= 1 << t
                if v.gt[n + lo] >> i & 1 or v.gt[j] >> (n + hi) & 1:
                    gt[s] |= 1 << t
    for u, w, strict in extra:
        ge[u] |= 1 << w
        if strict:
            gt[u] |= 1 << w
    g = MonotonicityConstraint(N, v.src, v.tgt, tuple(ge), tuple(gt), name=name, origin=origin)
    return close(g, src_inv, tgt_inv)


def _v_part(d: DifferenceMcs, g: MonotonicityConstraint) -> MonotonicityConstraint:
    """Projection of a difference MC onto the original variables."""
    n, N = d.n, d.size
    keep = list(range(n)) + [N + k for k in range(n)]
    ge, gt = [], []
    for u in keep:
        a = b = 0
        for k, w in enumerate(keep):
            if g.ge[u] >> w & 1:
                a |= 1 << k
            if g.gt[u] >> w & 1:
                b |= 1 << k
        ge.append(a)
        gt.append(b)
    return MonotonicityConstraint(n, g.src, g.tgt, tuple(ge), tuple(gt), False, True, g.name, g.origin)


def _v_invariant(d: DifferenceMcs, inv: Invariant) -> Invariant:
    n = d.n
    mask = (1 << n) - 1
    return Invariant(n, tuple(r & mask for r in inv.ge[:n]), tuple(r & mask for r in inv.gt[:n]))


def _is_elaborated(system: Mcs) -> bool:
    n = system.n
    for inv in system.points.values():
        for k in range(n - 1):
            if inv.relation(k, k + 1) not in ("<", "="):
                return False
    return True


def build_difference_mcs(elaborated: Mcs) -> DifferenceMcs:
    """Initial difference system of a fully elaborated, ascending re-indexed system."""
    if not _is_elaborated(elaborated):
        raise UsageError("input is not fully elaborated")
    n = elaborated.n
    pairs = _pairs(n)
    names = tuple(elaborated.names) + tuple(f"d{i + 1}_{j + 1}" for i, j in pairs)
    points = {}
    for p, inv in elaborated.points.items():
        dinv = _delta_invariant(n, pairs, inv)
        if dinv is None:
            raise InvariantViolation(f"difference invariant of {p} is unsatisfiable")
        points[p] = dinv
    edges = []
    for g in elaborated.live_edges():
        h = _derive(n, pairs, g, points[g.src], points[g.tgt], g.name, g.origin)
        if not h.bottom:
            edges.append(h)
    system = Mcs(names, points, tuple(edges), None)
    return DifferenceMcs(
        system,
        n,
        pairs,
        (),
        {p: p for p in points},
        {p: () for p in points},
        {p: frozenset([p]) for p in points},
        frozenset(points),
    )


# ----------------------------------------------------------------------------
# thread preservers


def mtp(d: DifferenceMcs, T: Mapping[str, Iterable[DiffIndex]] | None = None) -> dict[str, set]:
    """Greatest thread preserver contained in ``T`` (default: all pairs everywhere)."""
    P = {p: set(d.pairs if T is None else T.get(p, ())) for p in d.system.points}
    edges = d.system.live_edges()
    changed = True
    while changed:
        changed = False
        for g in edges:
            for a in sorted(P[g.src]):
                if not any(d.entails_ge(g, a, b) for b in P[g.tgt]):
                    P[g.src].discard(a)
                    changed = True
    return P


def is_thread_preserver(d: DifferenceMcs, P: Mapping[str, Iterable[DiffIndex]]) -> bool:
    for g in d.system.live_edges():
        for a in P.get(g.src, ()):
            if not any(d.entails_ge(g, a, b) for b in P.get(g.tgt, ())):
                return False
    return True


def _le(d: DifferenceMcs, inv: Invariant, a: DiffIndex, b: DiffIndex) -> bool:
    return bool(inv.ge[d.var(b)] >> d.var(a) & 1)


def _fresh(base: str, used: set) -> str:
    k = 1
    while f"{base}.{k}" in used:
        k += 1
    name = f"{base}.{k}"
    used.add(name)
    return name


def singleton_tp(
    d: DifferenceMcs, T: Mapping[str, Iterable[DiffIndex]] | None = None
) -> tuple[DifferenceMcs, dict[str, DiffIndex]] | None:
    """Singleton thread preserver inside ``T``, splitting points where no single minimum exists.

    Returns None when the restricted greatest thread preserver is empty at some point.
    """
    P = mtp(d, T)
    if any(not P[p] for p in d.system.points):
        return None
    choice: dict[str, DiffIndex] = {}
    system = d.system
    base = dict(d.base)
    guards = dict(d.guards)
    lineage = dict(d.lineage)
    used = set(d.used)
    freezers = [dict(fz) for fz in d.freezers]
    for p in list(d.system.points):
        inv = system.points[p]
        cand = sorted(P[p])
        lowest = [a for a in cand if all(_le(d, inv, a, b) for b in cand)]
        if lowest:
            choice[p] = lowest[0]
            continue
        # one representative per minimal class
        minimal = [
            a for a in cand if not any(_le(d, inv, b, a) and not _le(d, inv, a, b) for b in cand)
        ]
        reps: list[DiffIndex] = []
        for a in minimal:
            if not any(_le(d, inv, a, r) and _le(d, inv, r, a) for r in reps):
                reps.append(a)
        cases, extras = [], []
        for i, a in enumerate(reps):
            atoms = [(a, "<", b) for b in reps[:i]] + [(a, "<=", b) for b in reps[i + 1:]]
            vinv = _v_invariant(d, inv)
            dinv = _delta_invariant(d.n, d.pairs, vinv, tuple(guards[p]) + tuple(atoms))
            if dinv is None:
                raise InvariantViolation("split case contradicts its point invariant")
            dinv = dinv.conjoin(inv)
            cases.append(dinv)
            extras.append(atoms)
        names = [_fresh(p, used) for _ in reps]
        live = [(nm, c, a, ex) for nm, c, a, ex in zip(names, cases, reps, extras) if c is not None]
        system, _ = partial_elaborate(system, p, [c for _, c, _, _ in live], [nm for nm, _, _, _ in live])
        for nm, _, a, ex in live:
            choice[nm] = a
            base[nm] = base[p]
            guards[nm] = tuple(guards[p]) + tuple(ex)
            lineage[nm] = lineage[p] | {nm}
            for fz in freezers:
                if p in fz:
                    fz[nm] = fz[p]
        for m in (base, guards, lineage):
            m.pop(p, None)
        for fz in freezers:
            fz.pop(p, None)
    out = DifferenceMcs(system, d.n, d.pairs, tuple(freezers), base, guards, lineage, frozenset(used))
    for g in system.live_edges():
        if not out.entails_ge(g, choice[g.src], choice[g.tgt]):
            raise InvariantViolation("chosen minima do not form a singleton thread preserver")
    return out, choice


def _backed(n: int, v: MonotonicityConstraint, a: DiffIndex, b: DiffIndex) -> bool:
    """Whether ``x_a >= x'_b`` follows from the endpoint comparisons alone."""
    (lo, hi), (i, j) = a, b
    return bool(v.ge[n + i] >> lo & 1 and v.ge[hi] >> (n + j) & 1)


def _hold_equal(d: DifferenceMcs, g: MonotonicityConstraint, a: DiffIndex, b: DiffIndex) -> MonotonicityConstraint:
    """Strengthen ``g`` with ``x_a = x'_b``.

    When the inequality comes from the endpoints directly, both endpoint
    equalities are imposed and the difference arcs re-derived.  Otherwise only
    the difference equality itself is added.
    """
    n, N = d.n, d.size
    src_inv, tgt_inv = d.system.points[g.src], d.system.points[g.tgt]
    u, w = d.var(a), N + d.var(b)
    ge, gt = list(g.ge), list(g.gt)
    ge[u] |= 1 << w
    ge[w] |= 1 << u
    v = _v_part(d, g)
    if _backed(n, v, a, b):
        (lo, hi), (i, j) = a, b
        vge = list(v.ge)
        for s, t in ((lo, n + i), (hi, n + j)):
            vge[s] |= 1 << t
            vge[t] |= 1 << s
        v2 = close(MonotonicityConstraint(n, g.src, g.tgt, tuple(vge), v.gt))
        extra = [(x, y, bool(gt[x] >> y & 1)) for x in range(2 * N) for y in range(2 * N) if x != y and ge[x] >> y & 1]
        return _derive(n, d.pairs, v2, src_inv, tgt_inv, g.name, g.origin, extra)
    h = MonotonicityConstraint(N, g.src, g.tgt, tuple(ge), tuple(gt), name=g.name, origin=g.origin)
    return close(h, src_inv, tgt_inv)


def freeze_residual(d: DifferenceMcs, P: Mapping[str, DiffIndex]) -> DifferenceMcs:
    """Drop MCs that strictly decrease ``x_P``; freeze the rest and record two freezers."""
    edges = []
    for g in d.system.edges:
        if g.bottom:
            continue
        a, b = P[g.src], P[g.tgt]
        if d.entails_ge(g, a, b, strict=True):
            continue
        h = _hold_equal(d, g, a, b)
        if not h.bottom:
            edges.append(h)
    c1 = {p: P[p][0] for p in d.system.points if p in P}
    c2 = {p: P[p][1] for p in d.system.points if p in P}
    return replace(d, system=d.system.replace(edges=tuple(edges)), freezers=d.freezers + (c1, c2))


@dataclass(frozen=True)
class Regions:
    d0: frozenset
    d1l: frozenset
    d1h: frozenset
    d2: frozenset


def regions(d: DifferenceMcs, skip_equal_frozen: bool = False) -> dict[str, Regions]:
    """Per-point search regions delimited by the lowest and highest freezers."""
    if not d.freezers:
        raise UsageError("regions need at least one freezer")
    out = {}
    for p, inv in d.system.points.items():
        vals = [fz[p] for fz in d.freezers if p in fz]
        if not vals:
            raise UsageError(f"no freezer covers point {p!r}")
        cl, ch = min(vals), max(vals)
        frozen = set(vals)
        if skip_equal_frozen:
            frozen |= {k for k in range(d.n) for c in vals if inv.relation(k, c) == "="}
        d0 = frozenset((i, j) for i, j in d.pairs if j <= cl)
        d2 = frozenset((i, j) for i, j in d.pairs if i >= ch)
        d1l = frozenset((cl, j) for j in range(cl + 1, ch) if j not in frozen)
        d1h = frozenset((i, ch) for i in range(cl + 1, ch) if i not in frozen)
        out[p] = Regions(d0, d1l, d1h, d2)
    return out


# ----------------------------------------------------------------------------
# ranking construction

# vector entries: int constants and DiffIndex variables (elaborated positions)


def _scc_order(system: Mcs) -> tuple[dict[str, int], list[list[str]]]:
    """Reverse-topological SCC index per point (sinks get 0)."""
    dg = nx.DiGraph()
    dg.add_nodes_from(system.points)
    for g in system.live_edges():
        dg.add_edge(g.src, g.tgt)
    cond = nx.condensation(dg)
    order = list(nx.lexicographical_topological_sort(cond, key=lambda c: min(cond.nodes[c]["members"])))
    kappa = {}
    comps = []
    for pos, c in enumerate(reversed(order)):
        members = sorted(cond.nodes[c]["members"], key=list(system.points).index)
        comps.append(members)
        for p in members:
            kappa[p] = pos
    return kappa, comps


@dataclass
class _Budget:
    steps: int


def rank_system(
    d: DifferenceMcs, skip_equal_frozen: bool = False, _budget: _Budget | None = None
) -> tuple[dict[str, tuple], DifferenceMcs] | None:
    """Vectors per point of the (possibly split) system, or None on failure."""
    budget = _budget or _Budget(64 * (d.n + 1) * (len(d.system.points) + 1))
    kappa, comps = _scc_order(d.system)
    result: dict[str, tuple] = {p: (kappa[p],) for p in d.system.points}
    if d.vacant():
        return result, d
    final_points = dict(d.system.points)
    base, guards, lineage = dict(d.base), dict(d.guards), dict(d.lineage)
    used = set(d.used)
    for comp in comps:
        sub = d.restrict(comp)
        if sub.vacant():
            continue
        sub = replace(sub, used=frozenset(used))
        got = rank_scc(sub, skip_equal_frozen, budget)
        if got is None:
            return None
        frag, after = got
        used |= after.used
        for p in comp:
            final_points.pop(p, None)
            result.pop(p, None)
        for q, vec in frag.items():
            k = next(kappa[p] for p in comp if p in after.lineage[q])
            result[q] = (k,) + vec
            final_points[q] = after.system.points[q]
            base[q], guards[q], lineage[q] = after.base[q], after.guards[q], after.lineage[q]
    out = replace(
        d,
        system=Mcs(d.system.names, final_points, (), None),
        base=base,
        guards=guards,
        lineage=lineage,
        used=frozenset(used),
    )
    return result, out


def rank_scc(
    d: DifferenceMcs, skip_equal_frozen: bool = False, _budget: _Budget | None = None
) -> tuple[dict[str, tuple], DifferenceMcs] | None:
    """One quasi-ranking component for a strongly connected system, then recurse on the residual."""
    budget = _budget or _Budget(64 * (d.n + 1) * (len(d.system.points) + 1))
    budget.steps -= 1
    if budget.steps < 0:
        raise InvariantViolation("ranking construction did not converge")
    if not d.freezers:
        searches = [None]
    else:
        reg = regions(d, skip_equal_frozen)
        searches = [
            {p: r.d1l for p, r in reg.items()},
            {p: r.d1h for p, r in reg.items()},
            {p: r.d0 for p, r in reg.items()},
            {p: r.d2 for p, r in reg.items()},
        ]
    found = None
    for T in searches:
        if T is not None and not all(T.values()):
            continue
        found = singleton_tp(d, T)
        if found is not None:
            break
    if found is None:
        return None
    split, P = found
    residual = freeze_residual(split, P)
    head = {p: (P[p],) for p in split.system.points}
    if residual.vacant():
        return head, split
    rest = rank_system(residual, skip_equal_frozen, budget)
    if rest is None:
        return None
    vecs, after = rest
    out = {}
    for q, vec in vecs.items():
        p = next(p for p in split.system.points if p in after.lineage[q])
        out[q] = head[p] + vec
    return out, after


# ----------------------------------------------------------------------------
# user-facing ranking functions


@dataclass(frozen=True, order=True)
class Diff:
    """The difference ``x_hi - x_lo`` of two original variables."""

    lo: int
    hi: int


@dataclass(frozen=True)
class Case:
    """Guarded vector: the variable ordering, extra difference comparisons, and the vector."""

    order: tuple[frozenset, ...]
    diffs: tuple[tuple[Diff, str, Diff], ...]
    vector: tuple

    def variable_count(self) -> int:
        return sum(1 for v in self.vector if isinstance(v, Diff))


@dataclass(frozen=True)
class RankingFunction:
    names: tuple[str, ...]
    cases: Mapping[str, tuple[Case, ...]]
    rooted: str | None = None

    def max_variables(self) -> int:
        return max((c.variable_count() for cs in self.cases.values() for c in cs), default=0)


def _case_for(d: DifferenceMcs, p: str, vec: tuple, mapping: PointMapping) -> Case:
    ep = d.base[p]
    ren = mapping.renaming(ep)
    inv = d.system.points[p]
    # ordering blocks from the chain invariant
    blocks: list[list[int]] = [[ren[0]]] if d.n else []
    for k in range(1, d.n):
        if inv.relation(k - 1, k) == "=":
            blocks[-1].append(ren[k])
        else:
            blocks.append([ren[k]])

    def conv(a: DiffIndex) -> Diff:
        return Diff(ren[a[0]], ren[a[1]])

    diffs = tuple((conv(a), rel, conv(b)) for a, rel, b in d.guards[p])
    vector = tuple(conv(v) if isinstance(v, tuple) else v for v in vec)
    return Case(tuple(frozenset(b) for b in blocks), diffs, vector)


def synthesize_ranking(
    system: Mcs, root: str | None = None, skip_equal_frozen: bool = False
) -> RankingFunction | None:
    """Elaborate, build the difference system and construct a ranking function (None if none exists)."""
    n = system.n
    if n == 0:
        live = system.live_edges()
        kappa, _ = _scc_order(system)
        if any(kappa[g.src] <= kappa[g.tgt] for g in live):
            return None
        return RankingFunction(
            system.names, {p: (Case((), (), (kappa[p],)),) for p in system.points}, root
        )
    if root is not None and root not in system.points:
        raise UsageError(f"unknown root {root!r}")
    elab, mapping = fully_elaborate(system, root=root)
    d = build_difference_mcs(elab)
    got = rank_system(d, skip_equal_frozen)
    if got is None:
        return None
    vecs, final = got
    cases: dict[str, list[Case]] = {}
    for q, vec in vecs.items():
        orig = mapping.origin(final.base[q])
        cases.setdefault(orig, []).append(_case_for(final, q, vec, mapping))
    ordered = {p: tuple(cases.get(p, ())) for p in system.points if p in cases or root is None}
    return RankingFunction(system.names, ordered, root)


# ----------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    reason: str = ""
    edge: str | None = None
    source_case: int | None = None
    target_case: int | None = None
    counterexample: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def __bool__(self) -> bool:
        return self.ok


def _ordering_of(case: Case) -> Ordering:
    return tuple(case.order)


def _elaborated_branch(
    n: int, g: MonotonicityConstraint, src_order: Ordering, tgt_order: Ordering
) -> tuple[MonotonicityConstraint, tuple[int, ...], tuple[int, ...], Invariant, Invariant]:
    from .transform import _chain_invariant

    rs, rt = ordering_renaming(src_order), ordering_renaming(tgt_order)
    ci, cj = _chain_invariant(n, src_order), _chain_invariant(n, tgt_order)
    h = close(reindex(g, rs, rt), ci, cj)
    return h, rs, rt, ci, cj


def _position(ren: Sequence[int]) -> dict[int, int]:
    return {i: k for k, i in enumerate(ren)}


def _case_dinv(n: int, pairs, chain: Invariant, case: Case, pos) -> Invariant | None:
    extra = []
    for a, rel, b in case.diffs:
        extra.append(((pos[a.lo], pos[a.hi]), rel, (pos[b.lo], pos[b.hi])))
    return _delta_invariant(n, pairs, chain, extra)


def _vector_positions(case: Case, pos) -> tuple | None:
    out = []
    for v in case.vector:
        if isinstance(v, Diff):
            a, b = pos[v.lo], pos[v.hi]
            if a >= b:
                return None
            out.append((a, b))
        else:
            out.append(v)
    return tuple(out)


def _lex_symbolic(
    n: int,
    pairs,
    v: MonotonicityConstraint,
    sinv: Invariant,
    tinv: Invariant,
    svec: tuple,
    tvec: tuple,
) -> tuple[bool, str, MonotonicityConstraint | None]:
    """Entailed lexicographic decrease along one branch; returns (ok, reason, refuting MC)."""
    N = n + len(pairs)
    index = {p: n + k for k, p in enumerate(pairs)}
    extra: list[tuple[int, int, bool]] = []
    g = _derive(n, pairs, v, sinv, tinv)
    if g.bottom:
        return True, "infeasible", None
    for k in range(max(len(svec), len(tvec))):
        if k >= len(svec) or k >= len(tvec):
            return False, "vectors end without a strict decrease", g
        a, b = svec[k], tvec[k]
        if isinstance(a, int) and isinstance(b, int):
            if a > b:
                return True, "", None
            if a < b:
                return False, f"constant increases at slot {k}", g
            continue
        if isinstance(a, int) or isinstance(b, int):
            return False, f"slot {k} mixes a constant with a variable", g
        u, w = index[a], N + index[b]
        if g.gt[u] >> w & 1:
            return True, "", None
        if not g.ge[u] >> w & 1:
            return False, f"slot {k} may increase", g
        # equal case: continue with the equality imposed
        extra += [(u, w, False), (w, u, False)]
        (lo, hi), (i, j) = a, b
        if v.ge[n + i] >> lo & 1 and v.ge[hi] >> (n + j) & 1:
            ge, gt = list(v.ge), list(v.gt)
            for s, t in ((lo, n + i), (hi, n + j)):
                ge[s] |= 1 << t
                ge[t] |= 1 << s
            v = close(MonotonicityConstraint(n, v.src, v.tgt, tuple(ge), tuple(gt)))
            if v.bottom:
                return True, "infeasible", None
        g = _derive(n, pairs, v, sinv, tinv, extra=extra)
        if g.bottom:
            return True, "infeasible", None
    return False, "vectors end without a strict decrease", g


def _value(vec: tuple, state: Sequence[int]) -> tuple[int, ...]:
    return tuple(state[x.hi] - state[x.lo] if isinstance(x, Diff) else x for x in vec)


def _holds(case: Case, state: Sequence[int]) -> bool:
    for a, b in zip(case.order, case.order[1:]):
        if not max(state[i] for i in a) < min(state[i] for i in b):
            return False
    for block in case.order:
        if len({state[i] for i in block}) > 1:
            return False
    for a, rel, b in case.diffs:
        x, y = state[a.hi] - state[a.lo], state[b.hi] - state[b.lo]
        if not {"<": x < y, "<=": x <= y, "=": x == y, ">": x > y, ">=": x >= y}[rel]:
            return False
    return True


def _select(cases: Sequence[Case], state: Sequence[int]) -> int | None:
    for k, c in enumerate(cases):
        if _holds(c, state):
            return k
    return None


def _lex_greater(a: tuple, b: tuple) -> bool:
    return a > b


def _concrete_counterexample(
    n: int, g: MonotonicityConstraint, src_cases, tgt_cases, rng, samples: int, bound: int
) -> tuple | None:
    for _ in range(samples):
        vals = sample_solution(g.ge, g.gt, rng, bound)
        if vals is None:
            return None
        s, t = vals[:n], vals[n:]
        i = _select(src_cases, s)
        if i is None:
            continue
        j = _select(tgt_cases, t)
        if j is None:
            return (tuple(s), tuple(t), i, None)
        if not _lex_greater(_value(src_cases[i].vector, s), _value(tgt_cases[j].vector, t)):
            return (tuple(s), tuple(t), i, j)
    return None


def _v_refuter_sample(n: int, g: MonotonicityConstraint, rng, bound: int, sc: Case, tc: Case, tries: int = 60):
    """A concrete transition inside a refuting branch, if sampling finds one."""
    N = g.n
    keep = list(range(n)) + [N + k for k in range(n)]
    ge, gt = [], []
    for u in keep:
        a = b = 0
        for k, w in enumerate(keep):
            if g.ge[u] >> w & 1:
                a |= 1 << k
            if g.gt[u] >> w & 1:
                b |= 1 << k
        ge.append(a)
        gt.append(b)
    for _ in range(tries):
        vals = sample_solution(ge, gt, rng, bound)
        if vals is None:
            return None
        s, t = vals[:n], vals[n:]
        if _holds(sc, s) and _holds(tc, t):
            if not _lex_greater(_value(sc.vector, s), _value(tc.vector, t)):
                return tuple(s), tuple(t)
    return None


def check_ranking(
    system: Mcs,
    rho: RankingFunction,
    samples: int = 30,
    bound: int = 12,
    seed: int = 0,
    symbolic: bool = True,
    concrete: bool = True,
) -> CheckResult:
    """Check that ``rho`` decreases lexicographically on every transition.

    Symbolic part: for each MC and each pair of source/target cases whose
    conjunction is satisfiable, the decrease must be entailed.  Target states
    must always be covered by some case.  Concrete part: sampled transitions
    over ``[-bound, bound]``.
    """
    n = system.n
    pairs = _pairs(n)
    rng = random.Random(seed)
    for g in system.live_edges():
        src_cases = rho.cases.get(g.src, ())
        tgt_cases = rho.cases.get(g.tgt, ())
        if not src_cases:
            continue
        if symbolic:
            for si, sc in enumerate(src_cases):
                if n == 0:
                    if not tgt_cases:
                        return CheckResult(False, "target not covered", g.name, si)
                    for ti, tc in enumerate(tgt_cases):
                        if not _lex_greater(sc.vector, tc.vector):
                            return CheckResult(False, "no decrease", g.name, si, ti)
                    continue
                # coverage of target orderings
                src_order = _ordering_of(sc)
                covered = {tuple(tc.order) for tc in tgt_cases}
                for tord in enumerate_orderings(n):
                    h, *_ = _elaborated_branch(n, g, src_order, tord)
                    if not h.bottom and tuple(tord) not in covered:
                        return CheckResult(False, "target ordering not covered", g.name, si)
                for ti, tc in enumerate(tgt_cases):
                    h, rs, rt, ci, cj = _elaborated_branch(n, g, src_order, _ordering_of(tc))
                    if h.bottom:
                        continue
                    ps, pt = _position(rs), _position(rt)
                    sinv = _case_dinv(n, pairs, ci, sc, ps)
                    tinv = _case_dinv(n, pairs, cj, tc, pt)
                    if sinv is None or tinv is None:
                        continue
                    svec, tvec = _vector_positions(sc, ps), _vector_positions(tc, pt)
                    if svec is None or tvec is None:
                        return CheckResult(False, "malformed vector", g.name, si, ti)
                    ok, why, refuter = _lex_symbolic(n, pairs, h, sinv, tinv, svec, tvec)
                    if not ok:
                        cex = None
                        if refuter is not None:
                            # map the elaborated branch back to original variable order
                            cex_pos = _v_refuter_sample(n, refuter, rng, bound, _reindexed(sc, ps), _reindexed(tc, pt))
                            if cex_pos is not None:
                                s = [0] * n
                                t = [0] * n
                                for k in range(n):
                                    s[rs[k]] = cex_pos[0][k]
                                    t[rt[k]] = cex_pos[1][k]
                                cex = (tuple(s), tuple(t))
                        return CheckResult(False, why, g.name, si, ti, cex)
        if concrete:
            found = _concrete_counterexample(n, g, src_cases, tgt_cases, rng, samples, bound)
            if found is not None:
                s, t, i, j = found
                why = "target state not covered" if j is None else "sampled transition does not decrease"
                return CheckResult(False, why, g.name, i, j, (s, t))
    return CheckResult(True)


def _reindexed(case: Case, pos) -> Case:
    """The case expressed over elaborated positions."""

    def conv(x: Diff) -> Diff:
        return Diff(pos[x.lo], pos[x.hi])

    order = tuple(frozenset(pos[i] for i in b) for b in case.order)
    diffs = tuple((conv(a), r, conv(b)) for a, r, b in case.diffs)
    vec = tuple(conv(v) if isinstance(v, Diff) else v for v in case.vector)
    return Case(order, diffs, vec)


def verify_ranking(system: Mcs, rho: RankingFunction, **kw) -> bool:
    return check_ranking(system, rho, **kw).ok


# ----------------------------------------------------------------------------
# mutations used to test the checker

MUTATIONS = ("weaken-strict", "off-by-one", "swap-slots")


def _decisive_branches(system: Mcs, rho: RankingFunction):
    """Yield (edge, si, ti, slot, kind) for satisfiable branches and their deciding slot."""
    n = system.n
    pairs = _pairs(n)
    for g in system.live_edges():
        src_cases = rho.cases.get(g.src, ())
        tgt_cases = rho.cases.get(g.tgt, ())
        for si, sc in enumerate(src_cases):
            for ti, tc in enumerate(tgt_cases):
                if n == 0:
                    slot = next((k for k, (a, b) in enumerate(zip(sc.vector, tc.vector)) if a != b), None)
                    if slot is not None:
                        yield g, si, ti, slot, "const"
                    continue
                h, rs, rt, ci, cj = _elaborated_branch(n, g, _ordering_of(sc), _ordering_of(tc))
                if h.bottom:
                    continue
                ps, pt = _position(rs), _position(rt)
                sinv = _case_dinv(n, pairs, ci, sc, ps)
                tinv = _case_dinv(n, pairs, cj, tc, pt)
                if sinv is None or tinv is None or _derive(n, pairs, h, sinv, tinv).bottom:
                    continue
                svec, tvec = _vector_positions(sc, ps), _vector_positions(tc, pt)
                for k in range(1, min(len(svec), len(tvec)) + 1):
                    ok, why, _ = _lex_symbolic(n, pairs, h, sinv, tinv, svec[:k], tvec[:k])
                    if ok and why != "infeasible":
                        yield g, si, ti, k - 1, ("var" if isinstance(svec[k - 1], tuple) else "const")
                        break
                    if why == "infeasible":
                        break


def _with_vector(rho: RankingFunction, point: str, idx: int, vector: tuple) -> RankingFunction:
    cases = dict(rho.cases)
    lst = list(cases[point])
    lst[idx] = replace(lst[idx], vector=vector)
    cases[point] = tuple(lst)
    return replace(rho, cases=cases)


def mutate(system: Mcs, rho: RankingFunction, kind: str) -> RankingFunction | None:
    """Apply one mutation at the deciding slot of a satisfiable branch (None if not applicable).

    ``weaken-strict``  the deciding slot of the source vector becomes a copy of
                       the target's (a constant 0 for variables) and the rest is dropped;
    ``off-by-one``     a constant at or before the deciding slot of the target
                       vector is set one above the source's;
    ``swap-slots``     the deciding variable of the source vector trades places
                       with the constant before it.
    """
    if kind not in MUTATIONS:
        raise UsageError(f"unknown mutation {kind!r}")
    for g, si, ti, slot, what in _decisive_branches(system, rho):
        sc = rho.cases[g.src][si]
        tc = rho.cases[g.tgt][ti]
        same = g.src == g.tgt and si == ti
        if kind == "weaken-strict":
            filler = tc.vector[slot] if what == "const" else 0
            vec = sc.vector[:slot] + (filler,)
            return _with_vector(rho, g.src, si, vec)
        if kind == "off-by-one":
            if same:
                continue
            consts = [k for k in range(slot + 1) if isinstance(sc.vector[k], int) and isinstance(tc.vector[k], int)]
            if not consts:
                continue
            k = consts[-1]
            vec = tc.vector[:k] + (sc.vector[k] + 1,) + tc.vector[k + 1:]
            return _with_vector(rho, g.tgt, ti, vec)
        if kind == "swap-slots":
            if same or what != "var" or slot == 0:
                continue
            v = list(sc.vector)
            v[slot - 1], v[slot] = v[slot], v[slot - 1]
            return _with_vector(rho, g.src, si, tuple(v))
    return None
