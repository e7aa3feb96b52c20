"""Closure sets, local termination tests, decision procedures and witnesses."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import ceil
from typing import Iterable, Sequence

import networkx as nx

from .core import (
    InvariantViolation,
    Mcs,
    MonotonicityConstraint,
    UsageError,
    canonical_key,
    close,
    compose,
    _close_masks,
)
from .transform import restrict_reachable, stabilize

__all__ = [
    "ALGORITHMS",
    "Member",
    "ClosureSet",
    "CircularVariant",
    "Assignment",
    "Witness",
    "Verdict",
    "decide",
    "find_witness",
    "build_witness",
    "prepare",
    "closure_set",
    "circular_variant",
    "ltts",
    "ltt1",
    "is_idempotent",
    "idempotent_power",
    "balanced_extension",
    "balance_rounds",
    "has_balanced_strict_cycle",
    "ltt_general",
    "witness_assignment",
    "witness_extend",
    "check_assignment",
]

ALGORITHMS = ("stable-closure", "idempotent", "general", "cls")


@dataclass(frozen=True)
class Member:
    mc: MonotonicityConstraint
    path: tuple[str, ...]

    @property
    def key(self) -> tuple[str, str, bytes]:
        return (self.mc.src, self.mc.tgt, canonical_key(self.mc))


@dataclass
class ClosureSet:
    """Satisfiable collapses of finite multipaths, each with one realizing path."""

    members: list[Member] = field(default_factory=list)
    index: dict = field(default_factory=dict)
    by_src: dict = field(default_factory=dict)
    by_tgt: dict = field(default_factory=dict)

    def add(self, member: Member) -> bool:
        key = member.key
        if key in self.index:
            return False
        self.index[key] = member
        self.members.append(member)
        self.by_src.setdefault(member.mc.src, []).append(member)
        self.by_tgt.setdefault(member.mc.tgt, []).append(member)
        return True

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, mc: MonotonicityConstraint) -> bool:
        return (mc.src, mc.tgt, canonical_key(mc)) in self.index

    def keys(self) -> set:
        return set(self.index)

    def cyclic(self) -> list[Member]:
        return [m for m in self.members if m.mc.cyclic]


def _weaker_or_equal(h: MonotonicityConstraint, g: MonotonicityConstraint) -> bool:
    """Every relation of ``h`` is also in ``g``."""
    return all((a & ~b) == 0 for a, b in zip(h.ge + h.gt, g.ge + g.gt))


def closure_set(system: Mcs, subsume: bool = False) -> ClosureSet:
    """Least composition-closed set containing each satisfiable edge.

    Worklist in FIFO order; each pair of members is composed once, when the
    later of the two is processed.  With ``subsume`` a new member is dropped
    when a weaker-or-equal member with the same endpoints is already present.
    """
    cs = ClosureSet()
    done_src: dict[str, list[Member]] = {}
    done_tgt: dict[str, list[Member]] = {}
    queue: deque[Member] = deque()

    def offer(m: Member) -> None:
        if m.mc.bottom:
            return
        if subsume and any(
            _weaker_or_equal(h.mc, m.mc) for h in cs.by_src.get(m.mc.src, []) if h.mc.tgt == m.mc.tgt
        ):
            return
        if cs.add(m):
            queue.append(m)

    for g in system.edges:
        if not g.bottom:
            offer(Member(g, (g.name,)))
    while queue:
        m = queue.popleft()
        done_src.setdefault(m.mc.src, []).append(m)
        done_tgt.setdefault(m.mc.tgt, []).append(m)
        for h in list(done_src.get(m.mc.tgt, [])):
            offer(Member(compose(m.mc, h.mc), m.path + h.path))
        for h in list(done_tgt.get(m.mc.src, [])):
            if h is m:
                continue
            offer(Member(compose(h.mc, m.mc), h.path + m.path))
    return cs


@dataclass(frozen=True)
class CircularVariant:
    """A cyclic MC plus one flagged shortcut pair ``x_i <-> x_i'`` per variable."""

    base: MonotonicityConstraint
    shortcuts: tuple[tuple[int, int], ...]

    def base_arcs(self) -> list[tuple[int, int, bool]]:
        g = self.base
        return [
            (u, v, bool(g.gt[u] >> v & 1))
            for u in range(2 * g.n)
            for v in range(2 * g.n)
            if u != v and g.ge[u] >> v & 1
        ]

    def edge_count(self) -> int:
        return len(self.base_arcs()) + len(self.shortcuts)


def circular_variant(g: MonotonicityConstraint) -> CircularVariant:
    if not g.cyclic:
        raise UsageError("circular variant needs a cyclic MC")
    return CircularVariant(g, tuple((i, g.n + i) for i in range(g.n)))


def _reach(adj: Sequence[int]) -> list[int]:
    """Reflexive-transitive reachability on a bitmask adjacency."""
    r = [a | 1 << u for u, a in enumerate(adj)]
    size = len(r)
    for k in range(size):
        bit = 1 << k
        rk = r[k]
        for u in range(size):
            if r[u] & bit:
                r[u] |= rk
    return r


def _sccs(reach: Sequence[int]) -> list[int]:
    """Distinct SCC masks from a reachability table."""
    out = []
    seen = 0
    for u in range(len(reach)):
        if seen >> u & 1:
            continue
        comp = 0
        for v in range(len(reach)):
            if reach[u] >> v & 1 and reach[v] >> u & 1:
                comp |= 1 << v
        seen |= comp
        out.append(comp)
    return out


def _base_adj(g: MonotonicityConstraint) -> list[int]:
    return [row & ~(1 << u) for u, row in enumerate(g.ge)]


def _strict_inside(g: MonotonicityConstraint, comp: int) -> bool:
    return any(comp >> u & 1 and g.gt[u] & comp for u in range(2 * g.n))


def _cycle_components(g: MonotonicityConstraint, forward: bool) -> list[tuple[int, bool]]:
    """SCCs of the F-graph (``forward``) or B-graph holding a shortcut, with strictness."""
    n = g.n
    adj = _base_adj(g)
    for i in range(n):
        if forward:
            adj[n + i] |= 1 << i
        else:
            adj[i] |= 1 << (n + i)
    out = []
    for comp in _sccs(_reach(adj)):
        if any(comp >> i & 1 and comp >> (n + i) & 1 for i in range(n)):
            out.append((comp, _strict_inside(g, comp)))
    return out


def _require_cyclic_closed(g: MonotonicityConstraint) -> MonotonicityConstraint:
    if not g.cyclic:
        raise UsageError("test applies to cyclic MCs only")
    return g if g.closed else close(g)


def ltts(g: MonotonicityConstraint) -> bool:
    """Local test for stable systems: forward and backward cycles joined by an arc."""
    g = _require_cyclic_closed(g)
    if g.bottom:
        return True
    fwd = _cycle_components(g, True)
    if not fwd:
        return False
    bwd = _cycle_components(g, False)
    for fc, fs in fwd:
        # nodes v with some u in F, u >= v
        below = 0
        for u in range(2 * g.n):
            if fc >> u & 1:
                below |= g.ge[u]
        for bc, bs in bwd:
            if (fs or bs) and below & bc:
                return True
    return False


def is_idempotent(g: MonotonicityConstraint) -> bool:
    g = _require_cyclic_closed(g)
    if g.bottom:
        return True
    return canonical_key(compose(g, g)) == canonical_key(g)


def ltt1(g: MonotonicityConstraint) -> bool:
    """Exists l, h: x_l <= x_h, x_l <= x_l', x_h >= x_h', one of the last two strict."""
    g = _require_cyclic_closed(g)
    if not is_idempotent(g):
        raise UsageError("LTT1 requires an idempotent MC")
    if g.bottom:
        return True
    n = g.n
    for lo in range(n):
        if not g.ge[n + lo] >> lo & 1:
            continue
        lo_strict = bool(g.gt[n + lo] >> lo & 1)
        for hi in range(n):
            if g.ge[hi] >> lo & 1 and g.ge[hi] >> (n + hi) & 1:
                if lo_strict or g.gt[hi] >> (n + hi) & 1:
                    return True
    return False


def _power_sequence(g: MonotonicityConstraint):
    """Yield ``(k, g^k)`` until a power repeats or becomes bottom."""
    seen = set()
    p, k = g, 1
    while True:
        yield k, p
        if p.bottom:
            return
        key = canonical_key(p)
        if key in seen:
            return
        seen.add(key)
        p, k = compose(p, g), k + 1


def _idempotent_power_k(g: MonotonicityConstraint) -> tuple[MonotonicityConstraint, int]:
    g = _require_cyclic_closed(g)
    for k, p in _power_sequence(g):
        if p.bottom:
            return p, k
        if is_idempotent(p):
            return p, k
    raise InvariantViolation("power sequence cycled without an idempotent element")


def idempotent_power(g: MonotonicityConstraint) -> MonotonicityConstraint:
    """Some power g^k with g^k ; g^k = g^k (bottom if a power is bottom)."""
    return _idempotent_power_k(g)[0]


def _bal_step(g: MonotonicityConstraint) -> MonotonicityConstraint:
    n = g.n
    lo = (1 << n) - 1
    ge, gt = list(g.ge), list(g.gt)
    for i in range(n):
        ge[i] |= g.ge[n + i] >> n
        gt[i] |= g.gt[n + i] >> n
        ge[n + i] |= (g.ge[i] & lo) << n
        gt[n + i] |= (g.gt[i] & lo) << n
    return close(MonotonicityConstraint(n, g.src, g.tgt, tuple(ge), tuple(gt), name=g.name, origin=g.origin))


def balance_rounds(g: MonotonicityConstraint) -> tuple[MonotonicityConstraint, int]:
    """Balanced extension and the number of ``bal`` rounds that changed the MC."""
    g = _require_cyclic_closed(g)
    rounds = 0
    while not g.bottom:
        nxt = _bal_step(g)
        if not nxt.bottom and canonical_key(nxt) == canonical_key(g):
            break
        rounds += 1
        g = nxt
    return g, rounds


def balanced_extension(g: MonotonicityConstraint) -> MonotonicityConstraint:
    return balance_rounds(g)[0]


def has_balanced_strict_cycle(g: MonotonicityConstraint) -> bool:
    """A strict closed walk of shortcut balance 0 exists iff some power of g is bottom."""
    g = _require_cyclic_closed(g)
    if g.bottom:
        return True
    return any(p.bottom for _, p in _power_sequence(g))


def _signed_cycles(g: MonotonicityConstraint, comp: int) -> tuple[bool, bool]:
    """(negative-balance closed walk, positive-balance closed walk) inside ``comp``."""
    n = g.n
    nodes = [u for u in range(2 * n) if comp >> u & 1]
    arcs = []
    for u in nodes:
        for v in nodes:
            if u != v and g.ge[u] >> v & 1:
                arcs.append((u, v, 0))
    for i in range(n):
        if comp >> i & 1 and comp >> (n + i) & 1:
            arcs.append((i, n + i, 1))
            arcs.append((n + i, i, -1))

    def negative(sign: int) -> bool:
        dist = {u: 0 for u in nodes}
        for _ in range(len(nodes)):
            changed = False
            for u, v, w in arcs:
                if dist[u] + sign * w < dist[v]:
                    dist[v] = dist[u] + sign * w
                    changed = True
            if not changed:
                return False
        return True

    return negative(1), negative(-1)


def ltt_general(g: MonotonicityConstraint) -> bool:
    """General local test: balanced strict cycle, or joined forward/backward cycles.

    A forward cycle has net negative shortcut balance (more x'->x than x->x'),
    a backward cycle net positive; the connector is any path of the circular
    variant.
    """
    g = _require_cyclic_closed(g)
    if g.bottom or has_balanced_strict_cycle(g):
        return True
    n = g.n
    adj = _base_adj(g)
    for i in range(n):
        adj[i] |= 1 << (n + i)
        adj[n + i] |= 1 << i
    reach = _reach(adj)
    comps = _sccs(reach)
    info = []
    for comp in comps:
        neg, pos = _signed_cycles(g, comp)
        info.append((comp, neg, pos, _strict_inside(g, comp)))
    for fc, fneg, _, fs in info:
        if not fneg:
            continue
        u = (fc & -fc).bit_length() - 1
        for bc, _, bpos, bs in info:
            if bpos and (fs or bs) and reach[u] & bc:
                return True
    return False


# ----------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class Assignment:
    """Values ``rows[t][i]`` for the node ``x[t, i]`` of a multipath."""

    rows: tuple[tuple[int, ...], ...]

    def __getitem__(self, key: tuple[int, int]) -> int:
        t, i = key
        return self.rows[t][i]

    def __len__(self) -> int:
        return len(self.rows)


def check_assignment(edges: Sequence[MonotonicityConstraint], a: Assignment | Sequence[Sequence[int]]) -> bool:
    """Every arc of the unrolled multipath holds under ``a`` (needs len(edges)+1 rows)."""
    rows = a.rows if isinstance(a, Assignment) else a
    if len(rows) < len(edges) + 1:
        return False
    for t, g in enumerate(edges):
        if g.bottom:
            return False
        n = g.n
        vals = list(rows[t][:n]) + list(rows[t + 1][:n])
        for u in range(2 * n):
            for v in range(2 * n):
                if g.gt[u] >> v & 1:
                    if not vals[u] > vals[v]:
                        return False
                elif g.ge[u] >> v & 1:
                    if not vals[u] >= vals[v]:
                        return False
    return True


def _zero_line(g: MonotonicityConstraint) -> MonotonicityConstraint:
    """Extend ``g`` with x_0 (stored last) related to every variable."""
    n = g.n
    m = n + 1
    z, zp = n, m + n

    def lift(row: int) -> int:
        return (row & ((1 << n) - 1)) | ((row >> n) << m)

    ge = [0] * (2 * m)
    gt = [0] * (2 * m)
    for u in range(2 * n):
        nu = u if u < n else u + 1
        ge[nu] = lift(g.ge[u])
        gt[nu] = lift(g.gt[u])
    ge[z] |= 1 << z | 1 << zp
    ge[zp] |= 1 << zp | 1 << z

    def add_gt(a: int, b: int) -> None:
        ge[a] |= 1 << b
        gt[a] |= 1 << b

    def closed() -> None:
        if not _close_masks(ge, gt):
            raise InvariantViolation("zero-line extension became unsatisfiable")

    def related(u: int) -> bool:
        return bool(ge[u] >> z & 1 or ge[z] >> u & 1)

    # stage 1: growing variables sit above the zero line
    for i in range(n):
        if g.gt[n + i] >> i & 1:
            add_gt(i, z)
            add_gt(m + i, zp)
    closed()
    # stage 2: shrinking ones below it
    for i in range(n):
        if g.gt[i] >> (n + i) & 1:
            add_gt(z, i)
            add_gt(zp, m + i)
    closed()
    # stage 3: anything left goes above, unless its other copy is already below
    for i in range(n):
        for a, b, za, zb in ((i, m + i, z, zp), (m + i, i, zp, z)):
            if related(a):
                continue
            if related(b) and ge[zb] >> b & 1:
                add_gt(za, a)
            else:
                add_gt(a, za)
                if not related(b):
                    add_gt(b, zb)
            closed()
    return MonotonicityConstraint(m, g.src, g.tgt, tuple(ge), tuple(gt), False, True)


def _unrolled_digraph(edges: Sequence[MonotonicityConstraint]) -> nx.DiGraph:
    dg = nx.DiGraph()
    for t, g in enumerate(edges):
        n = g.n
        for u in range(2 * n):
            a = (t, u) if u < n else (t + 1, u - n)
            dg.add_node(a)
            for v in range(2 * n):
                if u != v and g.ge[u] >> v & 1:
                    b = (t, v) if v < n else (t + 1, v - n)
                    strict = bool(g.gt[u] >> v & 1)
                    if dg.has_edge(a, b):
                        strict = strict or dg[a][b]["strict"]
                    dg.add_edge(a, b, strict=strict)
    return dg


def witness_assignment(g: MonotonicityConstraint, length: int) -> Assignment:
    """Satisfying assignment of ``(g)^length`` built around a zero line.

    ``g`` must be idempotent, satisfiable and fail the stable local test.
    Nodes above the zero line get the largest number of strict arcs on a path
    down to it; nodes below get minus the largest count on a path up from it.
    """
    g = _require_cyclic_closed(g)
    if g.bottom or not is_idempotent(g) or ltts(g):
        raise UsageError("witness needs an idempotent, satisfiable MC failing the local test")
    if length < 0:
        raise UsageError("length must be non-negative")
    n = g.n
    hat = _zero_line(g)
    dg = _unrolled_digraph([hat] * max(length, 1))
    # merge all zero-line nodes
    zero = ("z",)
    mapping = {(t, n): zero for t in range(max(length, 1) + 1)}
    dg = nx.relabel_nodes(dg, mapping, copy=True)
    cond = nx.condensation(dg)
    member = cond.graph["mapping"]
    cstrict: dict[tuple[int, int], bool] = {}
    for a, b, data in dg.edges(data=True):
        ca, cb = member[a], member[b]
        if ca == cb:
            if data["strict"]:
                raise InvariantViolation("strict cycle in a satisfiable multipath")
            continue
        cstrict[(ca, cb)] = cstrict.get((ca, cb), False) or data["strict"]
    order = list(nx.topological_sort(cond))
    zc = member[zero]
    # down[c]: max strict arcs on a path c -> zero
    down: dict[int, int] = {zc: 0}
    for c in reversed(order):
        best = None
        for d in cond.successors(c):
            if d in down:
                w = down[d] + cstrict[(c, d)]
                best = w if best is None else max(best, w)
        if c != zc and best is not None:
            down[c] = best
    up: dict[int, int] = {zc: 0}
    for c in order:
        best = None
        for p in cond.predecessors(c):
            if p in up:
                w = up[p] + cstrict[(p, c)]
                best = w if best is None else max(best, w)
        if c != zc and best is not None:
            up[c] = best
    rows = []
    for t in range(length + 1):
        row = []
        for i in range(n):
            c = member[(t, i)]
            if c in down:
                row.append(down[c])
            elif c in up:
                row.append(-up[c])
            else:
                raise InvariantViolation(f"node x[{t},{i}] is unrelated to the zero line")
        rows.append(tuple(row))
    a = Assignment(tuple(rows))
    if not check_assignment([g] * length, a):
        raise InvariantViolation("zero-line assignment violates a constraint")
    return a


def _shortest_from_z(
    edges: Sequence[MonotonicityConstraint], fixed: dict[tuple[int, int], int], filler: int
) -> dict[tuple[int, int], int]:
    """Bellman-Ford distances from the auxiliary node ``z``."""
    n = edges[0].n if edges else 0
    nodes = [(t, i) for t in range(len(edges) + 1) for i in range(n)]
    dist = {v: fixed.get(v, filler) for v in nodes}
    arcs = []
    for t, g in enumerate(edges):
        for u in range(2 * n):
            a = (t, u) if u < n else (t + 1, u - n)
            for v in range(2 * n):
                if u != v and g.ge[u] >> v & 1:
                    b = (t, v) if v < n else (t + 1, v - n)
                    arcs.append((a, b, -1 if g.gt[u] >> v & 1 else 0))
    for _ in range(len(nodes) + 1):
        changed = False
        for a, b, w in arcs:
            if dist[a] + w < dist[b]:
                dist[b] = dist[a] + w
                changed = True
        if not changed:
            return dist
    raise InvariantViolation("negative cycle while extending an assignment")


def _fill(
    edges: Sequence[MonotonicityConstraint], boundary: dict[tuple[int, int], int], scale_bound: int
) -> dict[tuple[int, int], int]:
    mu = max(boundary.values())
    dist = _shortest_from_z(edges, boundary, mu + scale_bound)
    for v, val in boundary.items():
        if dist[v] != val:
            raise InvariantViolation("extension changed a boundary value")
    return dist


def witness_extend(
    cycle: Sequence[str],
    system: Mcs,
    inner: Assignment,
    length: int,
    factor: int | None = None,
) -> Assignment:
    """Lift an assignment of ``(collapse(cycle))^T`` to ``(cycle)^T``, truncated to ``length`` rows.

    Boundary values are scaled by ``n(l+1)`` (or ``factor``); each period's
    interior comes from shortest distances from an auxiliary node.
    """
    from .core import collapse

    edges = [system.edge(e) for e in cycle]
    if not edges:
        raise UsageError("empty cycle")
    g = collapse(list(cycle), system)
    periods = len(inner) - 1
    if periods >= 1 and not check_assignment([g] * periods, inner):
        raise UsageError("inner assignment does not satisfy the cycle's collapse")
    n = system.n
    ell = len(edges)
    factor = factor or n * (ell + 1)
    scaled = [tuple(factor * v for v in row) for row in inner.rows]
    rows: list[tuple[int, ...]] = [scaled[0]]
    cache: dict[tuple, list[tuple[int, ...]]] = {}
    for p in range(periods):
        lo, hi = scaled[p], scaled[p + 1]
        base = min(lo + hi) if n else 0
        key = tuple(v - base for v in lo + hi)
        if key not in cache:
            boundary = {}
            for i in range(n):
                boundary[(0, i)] = lo[i] - base
                boundary[(ell, i)] = hi[i] - base
            dist = _fill(edges, boundary, factor)
            cache[key] = [tuple(dist[(t, i)] for i in range(n)) for t in range(1, ell + 1)]
        rows.extend(tuple(v + base for v in r) for r in cache[key])
        if len(rows) >= length:
            break
    return Assignment(tuple(rows[:length]))


@dataclass(frozen=True)
class Witness:
    """Non-termination certificate: a stem into a cycle plus a verified prefix."""

    cycle: tuple[str, ...]
    stem: tuple[str, ...]
    prefix: tuple[tuple[int, ...], ...]
    mc: MonotonicityConstraint
    path: tuple[str, ...]  # edges of the analysed system realizing the prefix
    run: tuple[str, ...] = ()  # the same path as edges of the input system


@dataclass(frozen=True)
class Verdict:
    terminating: bool
    algorithm: str
    rooted: str | None = None
    failing: MonotonicityConstraint | None = None
    cycle: tuple[str, ...] | None = None
    witness: Witness | None = None

    @property
    def result(self) -> str:
        return "terminating" if self.terminating else "nonterminating"


def _shortest_stem(system: Mcs, roots: Iterable[str], target: str) -> tuple[str, ...] | None:
    roots = list(roots)
    if target in roots:
        return ()
    prev: dict[str, tuple[str, str] | None] = {r: None for r in roots}
    queue = deque(roots)
    out: dict[str, list[MonotonicityConstraint]] = {}
    for g in system.live_edges():
        out.setdefault(g.src, []).append(g)
    while queue:
        p = queue.popleft()
        for g in out.get(p, []):
            if g.tgt not in prev:
                prev[g.tgt] = (p, g.name)
                if g.tgt == target:
                    path = []
                    q = target
                    while prev[q] is not None:
                        q, e = prev[q]
                        path.append(e)
                    return tuple(reversed(path))
                queue.append(g.tgt)
    return None


def build_witness(
    system: Mcs,
    member: Member,
    length: int,
    roots: Iterable[str] | None = None,
) -> Witness:
    """Concrete prefix of ``length`` states for an idempotent member failing the stable test.

    ``system`` must be stable; with ``roots`` the run starts at one of them.
    """
    g, k = _idempotent_power_k(member.mc)
    if g.bottom or ltts(g):
        raise UsageError("member's idempotent power passes the local test")
    cycle = member.path * k
    stem: tuple[str, ...] = ()
    if roots is not None:
        found = _shortest_stem(system, roots, g.src)
        if found is None:
            raise UsageError("cycle is not reachable from the root")
        stem = found
    n = system.n
    ell = len(cycle)
    factor = n * (max(ell, len(stem)) + 1) if n else 1
    need = max(length - len(stem), 1)
    periods = ceil((need - 1) / ell) + 1 if need > 1 else 1
    inner = witness_assignment(g, periods)
    cyc_rows = witness_extend(cycle, system, inner, periods * ell + 1, factor=factor).rows
    rows = list(cyc_rows)
    if stem:
        stem_edges = [system.edge(e) for e in stem]
        boundary = {(len(stem), i): rows[0][i] for i in range(n)}
        base = min(boundary.values()) if n else 0
        shifted = {v: val - base for v, val in boundary.items()}
        dist = _fill(stem_edges, shifted, factor)
        stem_rows = [tuple(dist[(t, i)] + base for i in range(n)) for t in range(len(stem))]
        rows = stem_rows + rows
    path = (stem + cycle * periods)[: max(length - 1, 0)]
    prefix = tuple(rows[:length])
    if len(prefix) < length or not check_assignment([system.edge(e) for e in path], prefix):
        raise InvariantViolation("constructed witness prefix does not satisfy the multipath")
    origin = {e.name: e.origin for e in system.edges}
    return Witness(
        cycle=tuple(origin[e] for e in member.path),
        stem=tuple(origin[e] for e in stem),
        prefix=prefix,
        mc=member.mc,
        path=path,
        run=tuple(origin[e] for e in path),
    )


def _local_test(algorithm: str):
    if algorithm == "stable-closure":
        return ltts
    if algorithm == "general":
        return ltt_general
    if algorithm == "cls":
        return lambda g: (lambda b: b.bottom or ltts(b))(balanced_extension(g))
    if algorithm == "idempotent":
        return lambda g: (not is_idempotent(g)) or ltt1(g)
    raise UsageError(f"unknown algorithm {algorithm!r}")


def prepare(system: Mcs, algorithm: str, root: str | None = None) -> tuple[Mcs, list[str] | None]:
    """The system an algorithm actually analyses, and the root copies when rooted."""
    if algorithm not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {algorithm!r}")
    if root is None and algorithm in ("general", "cls"):
        return system, None
    stable, mapping = stabilize(system)
    if root is None:
        return stable, None
    if root not in system.points:
        raise UsageError(f"unknown root {root!r}")
    roots = mapping.copies(root)
    return restrict_reachable(stable, roots), roots


def decide(
    system: Mcs,
    algorithm: str = "stable-closure",
    root: str | None = None,
    witness: int | None = None,
) -> Verdict:
    """Decide termination with one of the four closure algorithms.

    With ``witness`` set, a non-terminating verdict carries a verified prefix of
    that many states (always built from the stabilized system).
    """
    target, roots = prepare(system, algorithm, root)
    test = _local_test(algorithm)
    cs = closure_set(target)
    failing = None
    for m in cs.cyclic():
        if not test(m.mc):
            failing = m
            break
    if failing is None:
        return Verdict(True, algorithm, root)
    origin = {e.name: e.origin for e in target.edges}
    cycle = tuple(origin[e] for e in failing.path)
    wit = None
    if witness is not None:
        wit = find_witness(system, witness, root)
    return Verdict(False, algorithm, root, failing.mc, cycle, wit)


def find_witness(system: Mcs, length: int, root: str | None = None) -> Witness:
    stable, roots = prepare(system, "stable-closure", root)
    cs = closure_set(stable)
    best = None
    for m in cs.cyclic():
        if is_idempotent(m.mc) and not ltts(m.mc):
            if best is None or len(m.path) < len(best.path):
                best = m
    if best is None:
        raise InvariantViolation("non-terminating verdict without an idempotent member failing the local test")
    return build_witness(stable, best, length, roots)
