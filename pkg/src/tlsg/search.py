"""Gadget search over masked lattice patches.

The pipeline per candidate layout: enumerate maximal independent sets,
choose ordered pins among open boundary sites, pick one target maximal IS
per satisfying assignment, then solve the weight program.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .constraints import LogicalConstraint
from .gadget import Gadget, certify
from .ilp import WeightProgram, formulate_and_solve, lp_feasible
from .lattice import GridLayout, LatticeFamily, LatticeKind, derive_edges
from .mwis import WeightedGraph, maximal_is_masks

DEFAULT_STREAM_CAP = 1 << 16

Site = tuple[int, int]


class SearchBudgetError(RuntimeError):
    """The candidate stream would exceed the configured cap."""


# -- lattice symmetry ---------------------------------------------------------


def _to_axial(s: Site) -> Site:
    x, y = s
    return x, y - x // 2


def _from_axial(a: Site) -> Site:
    q, r = a
    return q, r + q // 2


def _tri_ops():
    def rot(a):
        q, r = a
        return -r, q + r

    def refl(a):
        q, r = a
        return -q, q + r

    ops = []
    for k in range(6):
        for m in (False, True):
            def op(a, k=k, m=m):
                if m:
                    a = refl(a)
                for _ in range(k):
                    a = rot(a)
                return a
            ops.append(op)
    return ops


_TRI_OPS = _tri_ops()
_KING_OPS = [
    lambda a: (a[0], a[1]),
    lambda a: (-a[1], a[0]),
    lambda a: (-a[0], -a[1]),
    lambda a: (a[1], -a[0]),
    lambda a: (-a[0], a[1]),
    lambda a: (a[0], -a[1]),
    lambda a: (a[1], a[0]),
    lambda a: (-a[1], -a[0]),
]


def canonical_key(sites: Iterable[Site], family: LatticeFamily) -> tuple[Site, ...]:
    """Smallest translation-normalized image of ``sites`` under the point group.

    Triangular sites are compared in axial coordinates, where every lattice
    translation is an integer shift.
    """
    if family.kind is LatticeKind.TRIANGULAR:
        pts = [_to_axial(s) for s in sites]
        ops = _TRI_OPS
    else:
        pts = list(sites)
        ops = _KING_OPS
    best = None
    for op in ops:
        img = [op(p) for p in pts]
        mq = min(p[0] for p in img)
        mr = min(p[1] for p in img)
        key = tuple(sorted((p[0] - mq, p[1] - mr) for p in img))
        if best is None or key < best:
            best = key
    return best


# -- candidate layouts --------------------------------------------------------


def patch_sites(rows: int, cols: int) -> list[Site]:
    return [(x, y) for x in range(cols) for y in range(rows)]


def is_connected(sites: Sequence[Site], family: LatticeFamily) -> bool:
    if not sites:
        return False
    occ = set(sites)
    seen = {sites[0]}
    todo = [sites[0]]
    while todo:
        s = todo.pop()
        for nb in family.neighbors(s):
            if nb in occ and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(occ)


def generate_patch_graphs(
    family: LatticeFamily,
    rows: int,
    cols: int,
    dedupe: bool = True,
    cap: int = DEFAULT_STREAM_CAP,
    min_size: int = 1,
    max_size: int | None = None,
    required: Sequence[Site] = (),
    region: Sequence[Site] | None = None,
) -> Iterator[GridLayout]:
    """Connected occupancy masks of a ``rows x cols`` patch, smallest first.

    With ``dedupe`` masks equivalent under lattice symmetries are emitted once.
    ``required`` sites are always occupied (dedupe is then disabled, since
    symmetry would move them). ``region`` replaces the rectangle by an
    arbitrary set of sites.
    """
    if rows < 1 or cols < 1:
        raise ValueError("patch dimensions must be positive")
    base = patch_sites(rows, cols) if region is None else sorted(tuple(s) for s in region)
    req = [tuple(s) for s in required]
    if any(s not in base for s in req):
        raise ValueError("required sites must lie in the patch")
    free = [s for s in base if s not in req]
    hi = len(base) if max_size is None else min(max_size, len(base))
    lo = max(min_size, len(req), 1)
    total = sum(math.comb(len(free), k - len(req)) for k in range(lo, hi + 1))
    if total > cap:
        raise SearchBudgetError(f"{total} candidate masks exceed the cap {cap}")
    dedupe = dedupe and not req
    seen = set()
    for k in range(lo, hi + 1):
        for extra in itertools.combinations(free, k - len(req)):
            sites = sorted(req + list(extra))
            if not is_connected(sites, family):
                continue
            if dedupe:
                key = canonical_key(sites, family)
                if key in seen:
                    continue
                seen.add(key)
            yield GridLayout(family, tuple(sites), (1,) * len(sites))


def _outside(layout: GridLayout) -> set[Site]:
    xs = [x for x, _ in layout.sites]
    ys = [y for _, y in layout.sites]
    x0, x1 = min(xs) - 2, max(xs) + 2
    y0, y1 = min(ys) - 2, max(ys) + 2
    occ = set(layout.sites)
    box = {(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)}
    start = [s for s in box if s[0] in (x0, x1) or s[1] in (y0, y1)]
    seen = set(start)
    todo = deque(start)
    while todo:
        s = todo.popleft()
        for nb in layout.family.neighbors(s):
            if nb in box and nb not in occ and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return seen


def open_pin_candidates(layout: GridLayout, attachable: bool = False) -> list[int]:
    """Vertices with an empty lattice neighbor reachable from outside the layout.

    With ``attachable`` the empty neighbor must also touch no other occupied
    site, so a wire can be attached to this vertex alone.
    """
    if len(layout) == 0:
        raise ValueError("layout is empty")
    out = _outside(layout)
    occ = set(layout.sites)
    fam = layout.family
    res = []
    for i, s in enumerate(layout.sites):
        for nb in fam.neighbors(s):
            if nb not in out:
                continue
            if attachable and any(o in occ and o != s for o in fam.neighbors(nb)):
                continue
            res.append(i)
            break
    return res


def attach_points(layout: GridLayout, v: int) -> list[Site]:
    """Outside sites adjacent to vertex ``v`` and to nothing else in the layout."""
    out = _outside(layout)
    occ = set(layout.sites)
    s = layout.sites[v]
    fam = layout.family
    return [
        nb for nb in fam.neighbors(s)
        if nb in out and not any(o in occ and o != s for o in fam.neighbors(nb))
    ]


# -- targets ------------------------------------------------------------------


def mis_matrix(g: WeightedGraph) -> np.ndarray:
    rows = sorted(maximal_is_masks(g))
    M = np.zeros((len(rows), g.n), dtype=np.int8)
    for r, m in enumerate(rows):
        for v in range(g.n):
            M[r, v] = (m >> v) & 1
    return M


def _pin_groups(M: np.ndarray, pins: Sequence[int], constraint: LogicalConstraint):
    """Row indices per satisfying assignment, and rows projecting outside it."""
    proj = [tuple(int(b) for b in r) for r in M[:, list(pins)]]
    groups = {s: [] for s in constraint.rows()}
    outside = []
    for i, p in enumerate(proj):
        if p in groups:
            groups[p].append(i)
        else:
            outside.append(i)
    return groups, outside


def select_target_sets(
    mis_matrix: np.ndarray | Sequence[Sequence[int]],
    pins: Sequence[int],
    constraint: LogicalConstraint,
) -> Iterator[tuple[int, ...]]:
    """Every choice of one maximal IS (row index) per satisfying assignment.

    The tuple is ordered like ``constraint.rows()``. Nothing is yielded when
    some assignment has no maximal IS.
    """
    if len(set(pins)) != len(pins) or len(pins) != constraint.k:
        raise ValueError("pins must be distinct and match the constraint arity")
    M = np.asarray(mis_matrix, dtype=np.int8)
    groups, _ = _pin_groups(M, pins, constraint)
    lists = [groups[s] for s in constraint.rows()]
    if any(not l for l in lists):
        return
    yield from itertools.product(*lists)


def _partial_feasible(M, chosen, excluded, weight_cap, lower) -> bool:
    rows = list(chosen) + list(excluded)
    prog = WeightProgram.build(M[rows], range(len(chosen)), weight_cap, "sum", lower)
    return lp_feasible(prog)


def _target_dfs(
    M: np.ndarray,
    groups: dict,
    outside: list[int],
    weight_cap: int,
    objective: str,
    lower: list[int],
    first_only: bool,
) -> Iterator[tuple[list[int], list[int]]]:
    """Target choices with LP pruning; yields ``(targets, weights)``."""
    order = sorted(groups, key=lambda s: len(groups[s]))
    chosen: list[int] = []

    def rec(depth: int, excluded: list[int]):
        if depth == len(order):
            w = formulate_and_solve(M, chosen, weight_cap, objective, lower=lower)
            if w is not None:
                yield list(chosen), w
            return
        cands = groups[order[depth]]
        for c in cands:
            chosen.append(c)
            ex = excluded + [r for r in cands if r != c]
            if depth == 0 or _partial_feasible(M, chosen, ex, weight_cap, lower):
                found = False
                for hit in rec(depth + 1, ex):
                    found = True
                    yield hit
                    if first_only:
                        break
                if found and first_only:
                    chosen.pop()
                    return
            chosen.pop()

    yield from rec(0, list(outside))


def constraint_automorphisms(constraint: LogicalConstraint) -> list[tuple[int, ...]]:
    """Pin permutations that leave the satisfying set unchanged."""
    k = constraint.k
    out = []
    for perm in itertools.permutations(range(k)):
        img = {tuple(s[perm[i]] for i in range(k)) for s in constraint.satisfying}
        if img == constraint.satisfying:
            out.append(perm)
    return out


def crossing_pin_filter(layout: GridLayout, pins: Sequence[int]) -> bool:
    """Accept 4-pin tuples ``(a, a', b, b')`` that alternate around the layout.

    Pins are ordered by angle about the centroid; a crossing needs the
    cyclic pattern a, b, a, b.
    """
    pts = layout.physical(1.0)
    c = pts.mean(axis=0)
    ang = [math.atan2(pts[v][1] - c[1], pts[v][0] - c[0]) for v in pins]
    order = sorted(range(4), key=lambda i: ang[i])
    labels = [(0, 0, 1, 1)[i] for i in order]
    return labels in ([0, 1, 0, 1], [1, 0, 1, 0])


def hexagon_region(radius: int) -> list[Site]:
    """Triangular-lattice sites within ``radius`` hops of a center, on the grid."""
    pts = [
        _from_axial((q, r))
        for q in range(-radius, radius + 1)
        for r in range(-radius, radius + 1)
        if abs(q + r) <= radius
    ]
    dx = -min(x for x, _ in pts)
    dx += dx % 2
    dy = -min(y for _, y in pts)
    return sorted((x + dx, y + dy) for x, y in pts)


def diamond_region(radius: int) -> list[Site]:
    """King-lattice sites within Manhattan distance ``radius`` of a center."""
    d = 2 * radius + 1
    return [(x, y) for x in range(d) for y in range(d) if abs(x - radius) + abs(y - radius) <= radius]


def lattice_ops(family: LatticeFamily):
    """Point-group operations acting on grid sites (about the origin)."""
    if family.kind is LatticeKind.TRIANGULAR:
        return [lambda s, op=op: _from_axial(op(_to_axial(s))) for op in _TRI_OPS]
    return list(_KING_OPS)


@dataclass
class SearchStats:
    layouts: int = 0
    pin_sets: int = 0
    programs: int = 0
    found: int = 0


def _finish(layout: GridLayout, pins: Sequence[int], w: Sequence[int], constraint) -> Gadget | None:
    keep = [i for i, x in enumerate(w) if x > 0]
    pos = {v: i for i, v in enumerate(keep)}
    sub = GridLayout(layout.family, tuple(layout.sites[i] for i in keep), tuple(w[i] for i in keep))
    g = Gadget.from_layout(sub, [pos[p] for p in pins], constraint, constraint.name)
    return g if certify(g).ok else None


def search(
    family: LatticeFamily,
    rows: int,
    cols: int,
    constraint: LogicalConstraint,
    pin_candidate_sets: Sequence[Sequence[Site]] | None = None,
    objective: str = "sum",
    weight_cap: int = 6,
    stop_at_first: bool = False,
    layouts: Iterable[GridLayout] | None = None,
    attachable: bool = True,
    pin_filter=None,
    min_size: int = 1,
    max_size: int | None = None,
    cap: int = DEFAULT_STREAM_CAP,
    stats: SearchStats | None = None,
) -> Iterator[Gadget]:
    """Stream certified gadgets realizing ``constraint``.

    Pins are ordered tuples of open boundary vertices unless
    ``pin_candidate_sets`` lists explicit site tuples. With ``attachable``
    each pin needs an outside neighbor touching no other vertex. An optional
    ``pin_filter(layout, pins)`` rejects pin tuples. Every emitted gadget has
    zero-weight vertices removed and has been re-certified.
    """
    k = constraint.k
    if pin_candidate_sets is not None:
        pin_candidate_sets = [tuple(tuple(s) for s in ps) for ps in pin_candidate_sets]
        if any(len(ps) != k for ps in pin_candidate_sets):
            raise ValueError("pin candidate sets must match the constraint arity")
    if layouts is None:
        required = ()
        if pin_candidate_sets is not None and len(pin_candidate_sets) == 1:
            required = pin_candidate_sets[0]
        layouts = generate_patch_graphs(
            family, rows, cols,
            dedupe=pin_candidate_sets is None,
            cap=cap, min_size=max(min_size, k), max_size=max_size, required=required,
        )
    auts = constraint_automorphisms(constraint)
    stats = stats if stats is not None else SearchStats()
    for layout in layouts:
        stats.layouts += 1
        if pin_candidate_sets is None:
            opens = open_pin_candidates(layout, attachable)
            if len(opens) < k:
                continue
            perms = [
                p for p in itertools.permutations(opens, k)
                if pin_filter is None or pin_filter(layout, p)
            ]
            allowed = set(perms)
            # one representative per orbit of the constraint's pin symmetries
            tuples = []
            for p in perms:
                orbit = [tuple(p[a[i]] for i in range(k)) for a in auts]
                if p == min(q for q in orbit if q in allowed):
                    tuples.append(p)
        else:
            tuples = [
                tuple(layout.index(s) for s in ps)
                for ps in pin_candidate_sets if all(s in layout for s in ps)
            ]
            if attachable:
                opens = set(open_pin_candidates(layout, True))
                tuples = [p for p in tuples if all(v in opens for v in p)]
        if not tuples:
            continue
        graph = WeightedGraph(len(layout), None, derive_edges(layout))
        M = mis_matrix(graph)
        for pins in tuples:
            groups, outside = _pin_groups(M, pins, constraint)
            if any(not v for v in groups.values()):
                continue
            stats.pin_sets += 1
            lower = [0] * graph.n
            for p in pins:
                lower[p] = 1
            for _, w in _target_dfs(M, groups, outside, weight_cap, objective, lower, True):
                stats.programs += 1
                g = _finish(layout, pins, w, constraint)
                if g is not None:
                    stats.found += 1
                    yield g
                    if stop_at_first:
                        return
