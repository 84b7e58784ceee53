"""Compile a weighted graph into a lattice MWIS instance.

Construction outline:

* every source vertex ``v`` owns an L-shaped copy line: a vertical run in
  column ``X_v`` from the top row down to row ``Y_v``, then a horizontal run
  along row ``Y_v`` to the last column;
* the lines of ``i < j`` meet near ``(X_j, Y_i)``. Interior meetings get a
  crossing gadget (or the crossing-with-edge gadget when ``ij`` is an edge);
  meetings with the first row or the last column are T-junctions, which
  become a zero-weight contact bond for edges and nothing otherwise;
* copy-line pieces between gadget pins are induced lattice paths, each bond
  a NOT gadget, so weights add per the composition rule (ends 1, interior 2).

The resulting instance's ground states are exactly the independent sets of
the source; small per-vertex shifts then select the heaviest ones.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import networkx as nx

from .gadget import Gadget, GeometryError
from .lattice import (
    KING,
    TRIANGULAR,
    GridLayout,
    LatticeFamily,
    LatticeKind,
    derive_edges,
    family_from_name,
    layout_to_svg,
    normalize_sites,
    to_physical,
)
from .library import load_library
from .mwis import WeightedGraph, brute_force_mwis, solve_mwis
from .search import attach_points, lattice_ops

Site = tuple[int, int]

CELL_SIZE = {LatticeKind.TRIANGULAR: 6, LatticeKind.KING: 4}
CELL_FALLBACK = 2


class LibraryMissError(KeyError):
    """The gadget library lacks an entry needed for a substructure."""


class RoutingError(GeometryError):
    """No induced path of the required parity fits between two pins."""


class VerificationError(RuntimeError):
    """The encoding failed its oracle round trip."""


# -- source problems ----------------------------------------------------------


@dataclass(frozen=True)
class SourceProblem:
    n: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("source graph needs at least one vertex")
        es = set()
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"bad edge ({u}, {v})")
            es.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(es)))
        if self.weights is not None:
            w = tuple(int(x) for x in self.weights)
            if len(w) != self.n or any(x < 1 for x in w):
                raise ValueError("source weights must be positive integers, one per vertex")
            object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.edges)

    def vertex_weights(self) -> tuple[int, ...]:
        return self.weights if self.weights is not None else (1,) * self.n

    def graph(self) -> WeightedGraph:
        return WeightedGraph(self.n, self.vertex_weights(), self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set()

    def _edge_set(self):
        cache = self.__dict__.get("_es")
        if cache is None:
            cache = frozenset(self.edges)
            object.__setattr__(self, "_es", cache)
        return cache

    @classmethod
    def from_networkx(cls, g: nx.Graph, weight: str | None = None) -> "SourceProblem":
        nodes = sorted(g.nodes())
        pos = {v: i for i, v in enumerate(nodes)}
        ws = None
        if weight is not None:
            ws = tuple(int(g.nodes[v].get(weight, 1)) for v in nodes)
        return cls(len(nodes), tuple((pos[u], pos[v]) for u, v in g.edges()), ws)

    @classmethod
    def from_dict(cls, d: dict) -> "SourceProblem":
        edges = [tuple(e) for e in d.get("edges", [])]
        n = d.get("n")
        if n is None:
            n = 1 + max((max(e) for e in edges), default=-1)
        return cls(int(n), tuple(edges), tuple(d["weights"]) if d.get("weights") else None)

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges], "weights": list(self.vertex_weights())}


def brute_force_source(p: SourceProblem) -> tuple[int, list[tuple[int, ...]]]:
    return brute_force_mwis(p.graph())


# -- crossing lattice ---------------------------------------------------------


@dataclass(frozen=True)
class CopyLine:
    """Slots and ranges are 1-based as in the usual slot table."""

    vertex: int
    vslot: int | None
    vrange: tuple[int, int] | None
    hslot: int | None
    hrange: tuple[int, int] | None


@dataclass(frozen=True)
class Junction:
    row_vertex: int  # i, whose horizontal run passes
    col_vertex: int  # j, whose vertical run passes
    has_edge: bool
    kind: str  # "crossing", "top" or "right"


@dataclass
class CrossingLattice:
    problem: SourceProblem
    family: LatticeFamily
    cell_size: int
    copy_lines: list[CopyLine]
    junctions: list[Junction]

    def column(self, v: int) -> int:
        return self.cell_size * v

    def row(self, v: int) -> int:
        return self.cell_size * v

    def slot_table(self) -> list[dict]:
        return [
            {"vertex": c.vertex + 1, "vslot": c.vslot, "vrange": c.vrange, "hslot": c.hslot, "hrange": c.hrange}
            for c in self.copy_lines
        ]


def build_crossing_lattice(
    p: SourceProblem, family: LatticeFamily = TRIANGULAR, cell_size: int | None = None
) -> CrossingLattice:
    """Copy lines and the annotated meeting point of every vertex pair."""
    n = p.n
    lines = []
    for v in range(n):
        k = v + 1
        vert = (k, (1, k)) if k > 1 else (None, None)
        hor = (k, (k, n)) if k < n else (None, None)
        lines.append(CopyLine(v, vert[0], vert[1], hor[0], hor[1]))
    juncs = []
    for i in range(n):
        for j in range(i + 1, n):
            if j == n - 1:
                kind = "right"
            elif i == 0:
                kind = "top"
            else:
                kind = "crossing"
            juncs.append(Junction(i, j, p.has_edge(i, j), kind))
    return CrossingLattice(p, family, cell_size or CELL_SIZE[family.kind], lines, juncs)


# -- layout assembly ----------------------------------------------------------


def _axial(family: LatticeFamily, s: Site) -> Site:
    if family.kind is LatticeKind.TRIANGULAR:
        return s[0], s[1] - s[0] // 2
    return s


def _from_axial(family: LatticeFamily, a: Site) -> Site:
    if family.kind is LatticeKind.TRIANGULAR:
        return a[0], a[1] + a[0] // 2
    return a


def lattice_distance(family: LatticeFamily, a: Site, b: Site) -> int:
    if family.kind is LatticeKind.TRIANGULAR:
        qa, ra = _axial(family, a)
        qb, rb = _axial(family, b)
        dq, dr = qb - qa, rb - ra
        return (abs(dq) + abs(dr) + abs(dq + dr)) // 2
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass
class _Station:
    """Pins a copy line must pass through, in order.

    ``fixed`` pins must carry the vertex value itself; otherwise the pair's
    shared polarity is free. ``inp`` and ``out`` coincide for contacts.
    """

    inp: Site
    out: Site
    fixed: bool


class _Builder:
    def __init__(self, family: LatticeFamily, margin: int = 3, max_extra: int = 10):
        self.family = family
        self.weight: dict[Site, int] = {}
        self.owner: dict[Site, int | None] = {}
        self.sign: dict[Site, int] = {}
        self.bonds: set[frozenset] = set()
        self.margin = margin
        self.max_extra = max_extra
        self.gadget_energy = 0
        self.segments = 0

    def nbrs(self, s: Site) -> list[Site]:
        return self.family.neighbors(s)

    def add(self, s: Site, w: int, owner: int | None) -> None:
        if s in self.weight:
            raise GeometryError(f"site {s} already occupied")
        self.weight[s] = w
        self.owner[s] = owner

    def bond(self, a: Site, b: Site) -> None:
        self.bonds.add(frozenset((a, b)))

    def place_gadget(self, g: Gadget, op, anchor: Site, owners: dict[int, int]) -> list[Site]:
        fam = self.family
        img = [op(s) for s in g.layout.sites]
        ax = [_axial(fam, s) for s in img]
        cq = round(sum(a[0] for a in ax) / len(ax))
        cr = round(sum(a[1] for a in ax) / len(ax))
        aq, ar = _axial(fam, anchor)
        sites = [_from_axial(fam, (a[0] - cq + aq, a[1] - cr + ar)) for a in ax]
        own = set(sites)
        for s in sites:
            if s in self.weight or any(nb in self.weight and nb not in own for nb in self.nbrs(s)):
                raise GeometryError(f"gadget {g.name} collides near {s}")
        for v, (s, w) in enumerate(zip(sites, g.graph.weights)):
            self.add(s, int(w), owners.get(v))
        for u, v in g.graph.edges:
            self.bond(sites[u], sites[v])
        self.gadget_energy += g.mwis_energy
        return [sites[p] for p in g.pins]

    def _free_for_path(self, u: Site, ends: tuple[Site, Site]) -> bool:
        if u in self.weight:
            return False
        return all(nb not in self.weight or nb in ends for nb in self.nbrs(u))

    def paths(self, p: Site, q: Site, parity: int | None) -> Iterator[list[Site]]:
        """Induced paths ``p -> q`` touching nothing else, shortest first.

        ``parity`` constrains the bond count; ``None`` accepts both.
        """
        fam = self.family
        d = lattice_distance(fam, p, q)
        xs = (min(p[0], q[0]) - self.margin, max(p[0], q[0]) + self.margin)
        ys = (min(p[1], q[1]) - self.margin, max(p[1], q[1]) + self.margin)
        qn = set(self.nbrs(q))
        ends = (p, q)

        def inside(s):
            return xs[0] <= s[0] <= xs[1] and ys[0] <= s[1] <= ys[1]

        for k in range(max(d, 1), d + self.max_extra + 1):
            if parity is not None and k % 2 != parity:
                continue
            if k == 1:
                if q in self.nbrs(p):
                    yield [p, q]
                continue
            if p in qn:
                continue
            path = [p]
            on_path = {p}

            def dfs(c: Site, t: int):
                # t bonds used so far, current site c
                if t == k - 1:
                    if c in qn:
                        yield path + [q]
                    return
                cands = sorted(self.nbrs(c), key=lambda u: (lattice_distance(fam, u, q), u))
                for u in cands:
                    if u in on_path or not inside(u) or not self._free_for_path(u, ends):
                        continue
                    left = k - t - 1
                    if lattice_distance(fam, u, q) > left:
                        continue
                    if (u in qn) != (left == 1):
                        continue
                    if any(nb in on_path and nb != c for nb in self.nbrs(u)):
                        continue
                    path.append(u)
                    on_path.add(u)
                    yield from dfs(u, t + 1)
                    path.pop()
                    on_path.discard(u)

            yield from dfs(p, 0)

    def route(self, p: Site, q: Site, parity: int | None, owner: int) -> list[Site]:
        for path in self.paths(p, q, parity):
            return self._commit(path, owner)
        raise RoutingError(f"no induced path from {p} to {q} (parity {parity})")

    def _commit(self, path: list[Site], owner: int) -> list[Site]:
        for s in path[1:-1]:
            if s not in self.weight:
                self.add(s, 0, owner)
        for a, b in zip(path, path[1:]):
            self.weight[a] += 1
            self.weight[b] += 1
            self.bond(a, b)
        self.segments += len(path) - 1
        return path

    def _uncommit(self, path: list[Site]) -> None:
        for a, b in zip(path, path[1:]):
            self.weight[a] -= 1
            self.weight[b] -= 1
            self.bonds.discard(frozenset((a, b)))
        for s in path[1:-1]:
            del self.weight[s]
            del self.owner[s]
        self.segments -= len(path) - 1

    def route_chain(self, v: int, seq: list["_Station"], tries: int = 40) -> tuple[int, list[list[Site]]]:
        """Route consecutive stations of one copy line, backtracking over path choices.

        Returns the polarity given to the first station and the paths.  A
        free first station may start on either sublattice.
        """
        out: list[list[Site]] = []

        def rec(k: int, pol: int) -> bool:
            if k == len(seq):
                return True
            cur, st = seq[k - 1].out, seq[k]
            parity = (0 if pol == 1 else 1) if st.fixed else None
            for n_try, path in enumerate(self.paths(cur, st.inp, parity)):
                if n_try >= tries:
                    break
                self._commit(path, v)
                out.append(path)
                if rec(k + 1, pol if (len(path) - 1) % 2 == 0 else -pol):
                    return True
                out.pop()
                self._uncommit(path)
            return False

        for start in (1, -1) if not seq[0].fixed else (1,):
            if rec(1, start):
                return start, out
        raise RoutingError(f"copy line {v} cannot be routed through its stations")

    def dangle(self, s: Site, owner: int) -> Site:
        """Attach a one-bond tail to ``s``."""
        for u in sorted(self.nbrs(s)):
            if self._free_for_path(u, (s, s)):
                self.add(u, 0, owner)
                self._commit([s, u], owner)
                return u
        raise RoutingError(f"no room for a tail at {s}")


def _crossing_orientations(g: Gadget, family: LatticeFamily) -> list:
    """Point-group images of a crossing ranked for a N-S / W-E placement.

    Each entry is ``(op, (w, e, n, s))`` with gadget pin indices.  The score
    rewards pins lying along their axis and free attach points facing away
    from the gadget in the direction the wire leaves.
    """
    ranked = []
    a_pins, b_pins = (g.pins[0], g.pins[1]), (g.pins[2], g.pins[3])
    for k, op in enumerate(lattice_ops(family)):
        img = GridLayout(family, tuple(_shift_nonneg([op(s) for s in g.layout.sites], family)), g.graph.weights)
        pts = img.physical(1.0)
        for hor, ver in ((a_pins, b_pins), (b_pins, a_pins)):
            dh = pts[hor[1]] - pts[hor[0]]
            dv = pts[ver[1]] - pts[ver[0]]
            align = (abs(dh[0]) - abs(dh[1]) + abs(dv[1]) - abs(dv[0])) / max(1e-9, math.hypot(*dh) + math.hypot(*dv))
            w, e = sorted(hor, key=lambda p: pts[p][0])
            nn, ss = sorted(ver, key=lambda p: pts[p][1])
            facing = 0.0
            for pin, (ux, uy) in ((w, (-1, 0)), (e, (1, 0)), (nn, (0, -1)), (ss, (0, 1))):
                px, py = pts[pin]
                best = -2.0
                for t in attach_points(img, pin):
                    tx, ty = to_physical(t, family)
                    dx, dy = tx - px, ty - py
                    best = max(best, (dx * ux + dy * uy) / math.hypot(dx, dy))
                facing += best
            ranked.append((-round(facing + align, 9), k, op, (w, e, nn, ss)))
    ranked.sort(key=lambda t: t[:2])
    return [(op, pins) for _, _, op, pins in ranked]


def _orient_crossing(g: Gadget, family: LatticeFamily):
    """Best-ranked orientation, see :func:`_crossing_orientations`."""
    return _crossing_orientations(g, family)[0]


def _shift_nonneg(sites: list[Site], family: LatticeFamily) -> list[Site]:
    dx, dy = normalize_sites(sites, family)
    return [(x + dx, y + dy) for x, y in sites]


# -- results ------------------------------------------------------------------


@dataclass
class EncodingResult:
    layout: GridLayout
    pin_map: dict[int, list[int]]
    readout: dict[int, int]
    epsilon: Fraction
    scale: int
    energy_offset: int | None
    problem: SourceProblem
    base_energy: int
    meta: dict = field(default_factory=dict)

    def graph(self) -> WeightedGraph:
        return WeightedGraph(len(self.layout), self.layout.weights, derive_edges(self.layout))

    def to_dict(self) -> dict:
        return {
            "layout": self.layout.to_dict(),
            "pin_map": {str(k): v for k, v in self.pin_map.items()},
            "readout": {str(k): v for k, v in self.readout.items()},
            "epsilon": str(self.epsilon),
            "scale": self.scale,
            "energy_offset": self.energy_offset,
            "base_energy": self.base_energy,
            "problem": self.problem.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingResult":
        return cls(
            GridLayout.from_dict(d["layout"]),
            {int(k): list(v) for k, v in d["pin_map"].items()},
            {int(k): int(v) for k, v in d["readout"].items()},
            Fraction(d["epsilon"]),
            int(d["scale"]),
            d.get("energy_offset"),
            SourceProblem.from_dict(d["problem"]),
            int(d.get("base_energy", 0)),
            d.get("meta", {}),
        )

    def to_svg(self) -> str:
        labels = {i: str(v + 1) for v, i in self.readout.items()}
        marked = [i for sites in self.pin_map.values() for i in sites]
        return layout_to_svg(self.layout, highlight=marked, labels=labels)


@dataclass
class RawEncoding:
    """Unscaled composite before source weights are applied."""

    family: LatticeFamily
    weight: dict[Site, int]
    owner: dict[Site, int | None]
    sign: dict[Site, int]
    bonds: set
    n: int
    base_energy: int

    def site_count(self) -> int:
        return len(self.weight)


def replace_gadgets(cl: CrossingLattice, library: dict[str, Gadget] | None = None) -> RawEncoding:
    """Place junction gadgets and contacts, then route every copy line."""
    fam = cl.family
    lib = load_library(fam) if library is None else library
    for name in ("CROSS", "CROSS_EDGE"):
        if name not in lib:
            raise LibraryMissError(f"library has no {name} gadget for the {fam.name} lattice")
    n = cl.problem.n
    b = _Builder(fam)
    X = [cl.column(v) for v in range(n)]
    Y = [cl.row(v) for v in range(n)]
    stations: dict[int, list[tuple[int, _Station]]] = {v: [] for v in range(n)}
    orient = {name: _orient_crossing(lib[name], fam) for name in ("CROSS", "CROSS_EDGE")}

    if n == 1:
        s0 = (0, 0)
        b.add(s0, 0, 0)
        b.sign[s0] = 1
        b.dangle(s0, 0)
        return _finish_raw(b, n, stations)

    for jn in cl.junctions:
        i, j = jn.row_vertex, jn.col_vertex
        if jn.kind == "crossing":
            name = "CROSS_EDGE" if jn.has_edge else "CROSS"
            g = lib[name]
            op, (w, e, nn, ss) = orient[name]
            pos = {p: k for k, p in enumerate(g.pins)}
            owners = {w: i, e: i, nn: j, ss: j}
            sites = b.place_gadget(g, op, (X[j], Y[i]), owners)
            pin_site = {p: sites[pos[p]] for p in (w, e, nn, ss)}
            # vertical runs are sorted by the row of the meeting, horizontal by column
            stations[j].append((Y[i], _Station(pin_site[nn], pin_site[ss], jn.has_edge)))
            stations[i].append((Y[i] + X[j], _Station(pin_site[w], pin_site[e], jn.has_edge)))
        elif not jn.has_edge:
            continue
        elif jn.kind == "top":
            t = (X[j] + 1, Y[0])
            v = (X[j] + 1, Y[0] + 1)
            b.add(t, 0, 0)
            b.add(v, 0, j)
            b.bond(t, v)
            stations[0].append((X[j], _Station(t, t, True)))
            stations[j].append((Y[0] - 1, _Station(v, v, True)))
        else:  # right
            h = (X[n - 1] - 1, Y[i])
            c = (X[n - 1], Y[i])
            b.add(h, 0, i)
            b.add(c, 0, n - 1)
            b.bond(h, c)
            stations[i].append((10**9, _Station(h, h, True)))
            stations[n - 1].append((Y[i], _Station(c, c, True)))
    return _finish_raw(b, n, stations, X, Y)


def _finish_raw(b: _Builder, n: int, stations, X=None, Y=None) -> RawEncoding:
    for v in range(n):
        seq = [st for _, st in sorted(stations[v], key=lambda t: t[0])]
        if not seq:
            if X is None:
                continue
            # a vertex touching nothing still needs its own two-site wire
            s0 = (X[v], Y[v])
            b.add(s0, 0, v)
            b.sign[s0] = 1
            b.dangle(s0, v)
            b.sign[_last_added(b)] = -1
            continue
        first = seq[0]
        pol, paths = b.route_chain(v, seq)
        b.sign[first.inp] = pol
        b.sign[first.out] = pol
        cur = first.out
        for st, path in zip(seq[1:], paths):
            _sign_path(b, path, pol)
            pol = b.sign[st.inp]
            b.sign[st.out] = pol
            cur = st.out
        owned = [s for s, o in b.owner.items() if o == v]
        if len(owned) < 2 or (len(seq) == 1 and seq[0].inp == seq[0].out):
            tail = b.dangle(cur, v)
            b.sign[tail] = -b.sign[cur]
    return RawEncoding(b.family, b.weight, b.owner, b.sign, b.bonds, n, b.gadget_energy + b.segments)


def _last_added(b: _Builder) -> Site:
    return next(reversed(b.weight))


def _sign_path(b: _Builder, path: list[Site], pol: int) -> None:
    for k, s in enumerate(path):
        b.sign[s] = pol if k % 2 == 0 else -pol


def trim(raw: RawEncoding) -> RawEncoding:
    """Drop dangling two-site tails while each wire keeps a readout site.

    A tail is a leaf ``l`` whose neighbor ``m`` has degree two; removing both
    takes one bond's weight off the remaining neighbor.
    """
    weight = dict(raw.weight)
    bonds = set(raw.bonds)
    sign = dict(raw.sign)
    owner = dict(raw.owner)
    energy = raw.base_energy
    changed = True
    while changed:
        changed = False
        adj: dict[Site, set] = {s: set() for s in weight}
        for bd in bonds:
            a, c = tuple(bd)
            adj[a].add(c)
            adj[c].add(a)
        for leaf in sorted(weight):
            if len(adj[leaf]) != 1 or owner.get(leaf) is None or leaf not in sign:
                continue
            (mid,) = adj[leaf]
            if len(adj[mid]) != 2 or owner.get(mid) != owner[leaf] or weight[mid] != 2 or weight[leaf] != 1:
                continue
            (rest,) = adj[mid] - {leaf}
            v = owner[leaf]
            remaining = [s for s, o in owner.items() if o == v and s not in (leaf, mid)]
            if len(remaining) < 2 or not any(sign.get(s) == 1 for s in remaining):
                continue
            if weight[rest] - 1 < 1:
                continue
            weight[rest] -= 1
            for s in (leaf, mid):
                del weight[s]
                owner.pop(s, None)
                sign.pop(s, None)
            bonds.discard(frozenset((leaf, mid)))
            bonds.discard(frozenset((mid, rest)))
            energy -= 2
            changed = True
            break
    return RawEncoding(raw.family, weight, owner, sign, bonds, raw.n, energy)


def _check_geometry(layout: GridLayout, raw: RawEncoding) -> None:
    want = {frozenset((layout.index(a), layout.index(c))) for a, c in (tuple(bd) for bd in raw.bonds)}
    got = {frozenset(e) for e in derive_edges(layout)}
    if want != got:
        stray = sorted(tuple(sorted(layout.sites[i] for i in e)) for e in got - want)
        lost = sorted(tuple(sorted(layout.sites[i] for i in e)) for e in want - got)
        raise GeometryError(f"unit-disk edges differ from intended bonds: stray {stray[:5]}, missing {lost[:5]}")


def apply_weights(
    raw: RawEncoding,
    problem: SourceProblem,
    epsilon: Fraction | None = None,
    scale: int | None = None,
) -> EncodingResult:
    """Scale gadget weights by ``L`` and add ``epsilon * w_v * L`` at each readout.

    Each shift must stay below one gadget quantum, ``epsilon * max(w) < 1``.
    The default ``L = 4 * sum(w)`` with ``epsilon = 1 / L`` keeps even the
    total shift below one quantum.  ``epsilon = 0`` leaves every wire
    two-fold degenerate.
    """
    ws = problem.vertex_weights()
    total = sum(ws)
    if scale is None:
        scale = 4 * total
    if epsilon is None:
        epsilon = Fraction(1, scale)
    epsilon = Fraction(epsilon)
    if epsilon < 0 or epsilon * max(ws) >= 1:
        raise ValueError("epsilon must satisfy 0 <= epsilon * max(w) < 1")
    if (epsilon * scale).denominator != 1:
        raise ValueError("epsilon * scale must be an integer")
    unit = int(epsilon * scale)
    sites = sorted(raw.weight)
    shift = normalize_sites(sites, raw.family)
    moved = {s: (s[0] + shift[0], s[1] + shift[1]) for s in sites}
    pin_map: dict[int, list[Site]] = {v: [] for v in range(problem.n)}
    for s in sites:
        v = raw.owner.get(s)
        if v is not None and raw.sign.get(s) == 1:
            pin_map[v].append(moved[s])
    weights = {moved[s]: raw.weight[s] * scale for s in sites}
    readout = {}
    for v in range(problem.n):
        if not pin_map[v]:
            raise GeometryError(f"wire {v} has no readout site")
        r = min(pin_map[v])
        readout[v] = r
        weights[r] += unit * ws[v]
    layout = GridLayout.from_mapping(raw.family, weights)
    moved_raw = RawEncoding(
        raw.family,
        {moved[s]: w for s, w in raw.weight.items()},
        {moved[s]: o for s, o in raw.owner.items()},
        {moved[s]: g for s, g in raw.sign.items()},
        {frozenset(moved[s] for s in bd) for bd in raw.bonds},
        raw.n,
        raw.base_energy,
    )
    _check_geometry(layout, moved_raw)
    return EncodingResult(
        layout,
        {v: sorted(layout.index(s) for s in pin_map[v]) for v in pin_map},
        {v: layout.index(s) for v, s in readout.items()},
        epsilon,
        scale,
        None,
        problem,
        raw.base_energy * scale,
        {"family": raw.family.name},
    )


def decode(result: EncodingResult, c: Sequence[int]) -> tuple[int, ...]:
    """Majority vote over each wire's readout-equivalent sites, ties to 0."""
    out = []
    for v in range(result.problem.n):
        sites = result.pin_map[v]
        ones = sum(int(c[i]) for i in sites)
        out.append(1 if 2 * ones > len(sites) else 0)
    return tuple(out)


def encode(
    problem: SourceProblem,
    family: LatticeFamily | str = TRIANGULAR,
    library: dict[str, Gadget] | None = None,
    do_trim: bool = True,
    epsilon: Fraction | None = None,
    scale: int | None = None,
    cell_size: int | None = None,
) -> EncodingResult:
    """Full pipeline: crossing lattice, gadgets and routing, trim, weights.

    Without an explicit ``cell_size`` the family default is tried first and
    up to ``CELL_FALLBACK`` wider cells are tried when routing runs out of room.
    """
    fam = family_from_name(family)
    sizes = [cell_size] if cell_size else [CELL_SIZE[fam.kind] + k for k in range(CELL_FALLBACK + 1)]
    for k, size in enumerate(sizes):
        cl = build_crossing_lattice(problem, fam, size)
        try:
            raw = replace_gadgets(cl, library)
        except GeometryError:
            if k + 1 == len(sizes):
                raise
            continue
        break
    if do_trim:
        raw = trim(raw)
    result = apply_weights(raw, problem, epsilon, scale)
    result.meta["cell_size"] = cl.cell_size
    return result


@dataclass
class Verification:
    ok: bool
    encoded_energy: int
    source_energy: int
    energy_offset: int
    decoded: list[tuple[int, ...]]
    message: str = ""


def verify(result: EncodingResult, method: str = "auto") -> Verification:
    """Solve the encoding exactly and compare decoded optima with brute force.

    Weights are also checked against the scale: every site must be a
    multiple of ``scale`` except the readouts, which carry exactly their
    detuning shift on top.
    """
    p = result.problem
    unit = int(result.epsilon * result.scale)
    ws = p.vertex_weights()
    shifted = {i: unit * ws[v] for v, i in result.readout.items()}
    off = [
        (result.layout.sites[i], w)
        for i, w in enumerate(result.layout.weights)
        if w % result.scale != shifted.get(i, 0) % result.scale
    ]
    if off:
        site, w = off[0]
        return Verification(False, 0, 0, 0, [], f"weight {w} at site {site} is off the scale {result.scale}")
    src_e, _ = brute_force_source(p)
    enc_e, sols = solve_mwis(result.graph(), method=method)
    decoded = sorted({decode(result, c) for c in sols})
    g = p.graph()
    bad = [d for d in decoded if not g.is_independent(d) or g.weight_of(d) != src_e]
    offset = enc_e - src_e * unit
    ok = not bad and offset == result.base_energy
    msg = "" if ok else f"decoded optima {bad[:3]} or offset {offset} != {result.base_energy}"
    result.energy_offset = offset
    return Verification(ok, enc_e, src_e, offset, decoded, msg)


def overhead_estimate(n: int, m: int, family: LatticeFamily | str = TRIANGULAR) -> int:
    """Coarse site-count bound: ``8n^2 - 6n - 3m`` (triangular), ``4n^2`` (king)."""
    fam = family_from_name(family)
    if not 0 <= m <= n * (n - 1) // 2:
        raise ValueError("edge count out of range")
    if fam.kind is LatticeKind.KING:
        return 4 * n * n
    return 8 * n * n - 6 * n - 3 * m


def slot_aware_overhead(n: int, m: int, m_top: int = 0, m_right: int = 0) -> int:
    """Itemized triangular estimate with edges on the first row / last column split out."""
    if not 0 <= m_top + m_right <= m <= n * (n - 1) // 2:
        raise ValueError("edge counts out of range")
    return 6 * n * (n - 1) + 4 * m_right + (m - m_top - m_right) + 4 * (n * (n - 1) // 2 - m)


def write_json_atomic(path: str, payload: dict) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)
