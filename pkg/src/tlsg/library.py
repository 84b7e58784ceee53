"""Built-in gadget library and the searches that produce it.

The JSON file under ``data/`` is generated by :func:`rebuild` and checked
into the package; :func:`load_library` re-certifies every entry on load.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterator

from .constraints import CROSS, CROSS_EDGE, GATES, LogicalConstraint
from .gadget import Gadget, certify
from .lattice import KING, TRIANGULAR, LatticeFamily, family_from_name
from .search import crossing_pin_filter, diamond_region, generate_patch_graphs, hexagon_region, search

DATA_FILE = "gadgets.json"


@dataclass(frozen=True)
class Recipe:
    """Search parameters that rediscover one library gadget."""

    name: str
    family: LatticeFamily
    constraint: LogicalConstraint
    rows: int = 4
    cols: int = 4
    region: str | None = None
    min_size: int = 1
    max_size: int | None = None
    weight_cap: int = 6
    crossing: bool = False

    def layouts(self):
        region = {"hex2": hexagon_region(2), "diamond2": diamond_region(2), None: None}[self.region]
        return generate_patch_graphs(
            self.family, self.rows, self.cols,
            min_size=max(self.min_size, self.constraint.k), max_size=self.max_size,
            region=region, cap=1 << 20,
        )

    def run(self) -> Iterator[Gadget]:
        for g in search(
            self.family, self.rows, self.cols, self.constraint,
            layouts=self.layouts(), weight_cap=self.weight_cap,
            pin_filter=crossing_pin_filter if self.crossing else None,
        ):
            yield Gadget(g.graph, g.pins, g.constraint, g.mwis_energy, g.layout, self.name)


RECIPES: list[Recipe] = [
    *(Recipe(name, TRIANGULAR, c) for name, c in GATES.items()),
    Recipe("CROSS", TRIANGULAR, CROSS, region="hex2", min_size=12, max_size=12, weight_cap=4, crossing=True),
    Recipe("CROSS_EDGE", TRIANGULAR, CROSS_EDGE, region="hex2", max_size=12, weight_cap=4, crossing=True),
    *(Recipe(name, KING, GATES[name]) for name in ("AND", "NAND", "OR", "NOR")),
    Recipe("CROSS", KING, CROSS, 5, 5, region="diamond2", min_size=9, max_size=13, weight_cap=4, crossing=True),
    Recipe("CROSS_EDGE", KING, CROSS_EDGE, max_size=12, weight_cap=4, crossing=True),
]


def recipe(name: str, family: LatticeFamily | str) -> Recipe:
    fam = family_from_name(family)
    for r in RECIPES:
        if r.name == name and r.family == fam:
            return r
    raise KeyError(f"no recipe for {name} on {fam.name}")


def rebuild(path: str) -> list[Gadget]:
    """Run every recipe, keep the first hit of each, and write the library."""
    from .encoder import write_json_atomic

    found = []
    for r in RECIPES:
        g = next(r.run(), None)
        if g is not None:
            found.append(g)
    write_json_atomic(path, {"meta": {"source": "tlsg.library.rebuild"}, "gadgets": [g.to_dict() for g in found]})
    return found


@functools.lru_cache(maxsize=None)
def _load_all() -> tuple[Gadget, ...]:
    text = resources.files("tlsg").joinpath("data", DATA_FILE).read_text()
    data = json.loads(text)
    return tuple(Gadget.from_dict(d) for d in data["gadgets"])


def load_library(family: LatticeFamily | str, check: bool = True) -> dict[str, Gadget]:
    fam = family_from_name(family)
    out = {}
    for g in _load_all():
        if g.layout is not None and g.layout.family == fam:
            if check and not certify(g).ok:
                raise ValueError(f"library gadget {g.name} fails certification")
            out[g.name] = g
    return out
