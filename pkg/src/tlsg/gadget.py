"""Gadgets: weighted graphs whose MWIS set, projected on pins, is a constraint."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .constraints import LogicalConstraint, conjunction
from .lattice import GridLayout, derive_edges, family_from_name
from .mwis import WeightedGraph, solve_mwis


class GeometryError(ValueError):
    """A layout operation would create an unintended unit-disk edge."""


@dataclass(frozen=True)
class Gadget:
    graph: WeightedGraph
    pins: tuple[int, ...]
    constraint: LogicalConstraint
    mwis_energy: int
    layout: GridLayout | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pins", tuple(int(p) for p in self.pins))
        if len(set(self.pins)) != len(self.pins):
            raise ValueError("pins must be distinct")
        if len(self.pins) != self.constraint.k:
            raise ValueError("pin count does not match constraint arity")
        if self.layout is not None and len(self.layout) != self.graph.n:
            raise ValueError("layout and graph sizes differ")

    @property
    def n(self) -> int:
        return self.graph.n

    @classmethod
    def from_layout(
        cls,
        layout: GridLayout,
        pins: Sequence[int],
        constraint: LogicalConstraint,
        name: str = "",
    ) -> "Gadget":
        graph = WeightedGraph(len(layout), layout.weights, derive_edges(layout))
        energy, _ = solve_mwis(graph)
        return cls(graph, tuple(pins), constraint, energy, layout, name)

    def pin_sites(self) -> list[tuple[int, int]]:
        if self.layout is None:
            raise ValueError("gadget has no layout")
        return [self.layout.sites[p] for p in self.pins]

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "constraint": self.constraint.to_dict(),
            "pins": list(self.pins),
            "weights": list(self.graph.weights),
            "mwis_energy": self.mwis_energy,
        }
        if self.layout is not None:
            d["family"] = self.layout.family.name
            d["mask"] = [list(s) for s in self.layout.sites]
        else:
            d["n"] = self.graph.n
            d["edges"] = sorted(list(e) for e in self.graph.edges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gadget":
        constraint = LogicalConstraint.from_dict(d["constraint"])
        if "mask" in d:
            layout = GridLayout(
                family_from_name(d["family"]),
                tuple(tuple(s) for s in d["mask"]),
                tuple(d["weights"]),
            )
            graph = WeightedGraph(len(layout), layout.weights, derive_edges(layout))
        else:
            layout = None
            graph = WeightedGraph(d["n"], d["weights"], [tuple(e) for e in d["edges"]])
        return cls(graph, tuple(d["pins"]), constraint, int(d["mwis_energy"]), layout, d.get("name", ""))


def pin_projection(c: Sequence[int], pins: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(c[p]) for p in pins)


@dataclass
class Certificate:
    ok: bool
    energy: int
    spurious: list[tuple[int, ...]] = field(default_factory=list)
    missing: list[tuple[int, ...]] = field(default_factory=list)
    degenerate: dict = field(default_factory=dict)
    energy_mismatch: bool = False

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return f"certified (MWIS energy {self.energy})"
        parts = []
        if self.spurious:
            parts.append("spurious " + ",".join("".join(map(str, s)) for s in self.spurious))
        if self.missing:
            parts.append("missing " + ",".join("".join(map(str, s)) for s in self.missing))
        if self.degenerate:
            parts.append(
                "degenerate "
                + ",".join(f"{''.join(map(str, k))}x{v}" for k, v in sorted(self.degenerate.items()))
            )
        if self.energy_mismatch:
            parts.append("stored energy differs")
        return "; ".join(parts)


def certify(g: Gadget, method: str = "auto") -> Certificate:
    """Recompute the MWIS set from scratch and compare pin projections with the constraint."""
    energy, sols = solve_mwis(g.graph, method=method)
    counts = Counter(pin_projection(s, g.pins) for s in sols)
    target = g.constraint.satisfying
    spurious = sorted(set(counts) - target)
    missing = sorted(target - set(counts))
    degenerate = {k: v for k, v in counts.items() if v > 1}
    mismatch = energy != g.mwis_energy
    ok = not (spurious or missing or degenerate or mismatch)
    return Certificate(ok, energy, spurious, missing, degenerate, mismatch)


def certify_bruteforce(g: Gadget) -> bool:
    """Independent check by enumerating all 2**n configurations."""
    from .mwis import brute_force_mwis

    energy, sols = brute_force_mwis(g.graph)
    counts = Counter(pin_projection(s, g.pins) for s in sols)
    return (
        energy == g.mwis_energy
        and set(counts) == set(g.constraint.satisfying)
        and all(v == 1 for v in counts.values())
    )


def remove_zero_weight(
    graph_weights: Sequence[int], edges, pins: Sequence[int]
) -> tuple[list[int], list[int]]:
    """Indices kept after dropping weight-0 vertices, and the remapped pins.

    Raises ``ValueError`` when a pin would be removed.
    """
    keep = [i for i, w in enumerate(graph_weights) if w > 0]
    pos = {v: i for i, v in enumerate(keep)}
    if any(p not in pos for p in pins):
        raise ValueError("a pin has zero weight")
    return keep, [pos[p] for p in pins]


def compose(
    g1: Gadget,
    g2: Gadget,
    merges: Sequence[tuple[int, int]],
    keep_merged_pins: bool = True,
    name: str = "",
) -> Gadget:
    """Merge pins of two gadgets; merged vertices carry the summed weight.

    ``merges`` pairs a pin index of ``g1`` (vertex id) with one of ``g2``.
    With layouts, ``g2``'s layout must sit in ``g1``'s coordinate frame and
    merged pins must coincide; any new unit-disk edge raises
    :class:`GeometryError`.
    """
    m1 = {p: q for p, q in merges}
    m2 = {q: p for p, q in merges}
    if len(m1) != len(merges) or len(m2) != len(merges):
        raise ValueError("each pin may be merged once")
    for p, q in merges:
        if p not in g1.pins or q not in g2.pins:
            raise ValueError("only pins can be merged")

    # vertex ids: g1 keeps its ids, unmerged g2 vertices are appended
    remap2 = {}
    nxt = g1.n
    for v in range(g2.n):
        if v in m2:
            remap2[v] = m2[v]
        else:
            remap2[v] = nxt
            nxt += 1
    weights = list(g1.graph.weights) + [0] * (nxt - g1.n)
    for v in range(g2.n):
        weights[remap2[v]] += g2.graph.weights[v]
    edges = set(g1.graph.edges)
    for u, v in g2.graph.edges:
        a, b = remap2[u], remap2[v]
        edges.add((min(a, b), max(a, b)))
    graph = WeightedGraph(nxt, weights, edges)

    layout = None
    if g1.layout is not None and g2.layout is not None:
        if g1.layout.family != g2.layout.family:
            raise GeometryError("cannot merge layouts of different lattice families")
        sites = list(g1.layout.sites) + [None] * (nxt - g1.n)
        for v in range(g2.n):
            s = g2.layout.sites[v]
            if v in m2:
                if g1.layout.sites[m2[v]] != s:
                    raise GeometryError(f"merged pins sit on different sites {s}")
            else:
                sites[remap2[v]] = s
        if len(set(sites)) != len(sites):
            raise GeometryError("gadget layouts overlap on a site")
        layout = GridLayout(g1.layout.family, tuple(sites), tuple(weights))
        geo = set(derive_edges(layout))
        if geo != set(graph.edges):
            extra = sorted(geo - set(graph.edges))
            raise GeometryError(
                "merge creates unit-disk edges "
                + ", ".join(f"{layout.sites[a]}-{layout.sites[b]}" for a, b in extra)
            )

    # composite pins and constraint
    pins1 = list(g1.pins)
    pins2 = [remap2[q] for q in g2.pins]
    all_pins = pins1 + [p for p in pins2 if p not in pins1]
    var = {p: i for i, p in enumerate(all_pins)}
    sat = conjunction(
        g1.constraint, [var[p] for p in pins1], g2.constraint, [var[p] for p in pins2], len(all_pins)
    )
    if not sat:
        raise ValueError("constraints have an empty conjunction")
    if keep_merged_pins:
        out_pins = all_pins
        rows = sat
    else:
        merged = {p for p, _ in merges}
        out_pins = [p for p in all_pins if p not in merged]
        idx = [var[p] for p in out_pins]
        rows = {tuple(r[i] for i in idx) for r in sat}
    constraint = LogicalConstraint(len(out_pins), frozenset(rows), name)
    energy = g1.mwis_energy + g2.mwis_energy
    return Gadget(graph, tuple(out_pins), constraint, energy, layout, name)


def not_gadget(delta: int = 1) -> Gadget:
    from .constraints import NOT

    return Gadget(WeightedGraph(2, [delta, delta], [(0, 1)]), (0, 1), NOT, delta, name="NOT")


def copy_wire(n_not: int, delta: int = 1) -> Gadget:
    """Odd-length vertex wire built from ``n_not`` (even) NOT gadgets.

    Pins are the two end vertices; the constraint says they are equal.
    """
    if n_not < 1:
        raise ValueError("need at least one NOT gadget")
    g = not_gadget(delta)
    for _ in range(n_not - 1):
        last = g.pins[-1]
        g = compose(g, not_gadget(delta), [(last, 0)], keep_merged_pins=True)
        g = Gadget(g.graph, (g.pins[0], g.pins[-1]),
                   LogicalConstraint.from_rows({(r[0], r[-1]) for r in g.constraint.rows()}),
                   g.mwis_energy)
    name = "COPY" if n_not % 2 == 0 else "NOTWIRE"
    return Gadget(g.graph, g.pins, LogicalConstraint(2, g.constraint.satisfying, name), g.mwis_energy, name=name)


def save_gadgets(path: str, gadgets: Sequence[Gadget], meta: dict | None = None) -> None:
    payload = {"meta": meta or {}, "gadgets": [g.to_dict() for g in gadgets]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_gadgets(path: str) -> list[Gadget]:
    with open(path) as fh:
        data = json.load(fh)
    items = data["gadgets"] if isinstance(data, dict) else data
    return [Gadget.from_dict(d) for d in items]
