"""Grid representations of the triangular and King's lattices.

Sites live on an integer square grid ``(x, y)`` (column, row). Physical
positions are always derived from the grid coordinate and the lattice family:

* triangular: odd columns are shifted by half a spacing,
  ``(X, Y) = (sqrt(3)/2 * a * x, a * (y + (x mod 2) / 2))``
* king: ``(X, Y) = (a * x, a * y)``
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

# relative tolerance on distance comparisons
EPS_GEOM = 1e-6


class LatticeKind(str, Enum):
    TRIANGULAR = "triangular"
    KING = "king"


@dataclass(frozen=True)
class LatticeFamily:
    """A lattice type together with its unit-disk distance bounds.

    ``r_max`` is the longest edge length and ``R_min`` the shortest
    non-edge length, both in units of the lattice spacing.
    """

    kind: LatticeKind
    r_max: float
    R_min: float

    @property
    def name(self) -> str:
        return self.kind.value

    def neighbor_offsets(self, x: int) -> tuple[tuple[int, int], ...]:
        """Grid offsets of the lattice neighbors of a site in column ``x``."""
        if self.kind is LatticeKind.KING:
            return _KING_OFFSETS
        return _TRI_EVEN if x % 2 == 0 else _TRI_ODD

    def neighbors(self, site: tuple[int, int]) -> list[tuple[int, int]]:
        x, y = site
        return [(x + dx, y + dy) for dx, dy in self.neighbor_offsets(x)]

    def are_adjacent(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        dx, dy = b[0] - a[0], b[1] - a[1]
        return (dx, dy) in self.neighbor_offsets(a[0])


_TRI_EVEN = ((0, -1), (0, 1), (-1, 0), (1, 0), (-1, -1), (1, -1))
_TRI_ODD = ((0, -1), (0, 1), (-1, 0), (1, 0), (-1, 1), (1, 1))
_KING_OFFSETS = tuple(
    (dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)
)

TRIANGULAR = LatticeFamily(LatticeKind.TRIANGULAR, r_max=1.0, R_min=math.sqrt(3.0))
KING = LatticeFamily(LatticeKind.KING, r_max=math.sqrt(2.0), R_min=2.0)


def family_from_name(name: str | LatticeFamily) -> LatticeFamily:
    if isinstance(name, LatticeFamily):
        return name
    key = str(name).lower()
    if key in ("triangular", "tlsg", "tri"):
        return TRIANGULAR
    if key in ("king", "ksg", "square"):
        return KING
    raise ValueError(f"unknown lattice family {name!r}")


def to_physical(
    c: tuple[int, int], family: LatticeFamily, a: float = 1.0
) -> tuple[float, float]:
    """Map a grid coordinate to physical coordinates with spacing ``a``."""
    if a <= 0:
        raise ValueError("lattice spacing must be positive")
    x, y = c
    if family.kind is LatticeKind.TRIANGULAR:
        return (math.sqrt(3.0) / 2.0 * a * x, a * (y + 0.5 * (x % 2)))
    return (a * x, a * y)


def quality_metrics(family: LatticeFamily) -> tuple[float, float]:
    """Quality factor ``Q = R_min / r_max`` and its sixth power."""
    q = family.R_min / family.r_max
    return q, q**6


@dataclass(frozen=True)
class GridLayout:
    """Weighted sites on a lattice grid.

    ``sites`` holds ``(x, y)`` grid coordinates; ``weights`` the matching
    positive integer weights. ``unit`` is the physical spacing in micrometres,
    only needed once the layout is simulated.
    """

    family: LatticeFamily
    sites: tuple[tuple[int, int], ...]
    weights: tuple[int, ...]
    unit: float | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        sites = tuple((int(x), int(y)) for x, y in self.sites)
        weights = tuple(int(w) for w in self.weights)
        if len(sites) != len(weights):
            raise ValueError("sites and weights differ in length")
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate grid coordinate in layout")
        if any(x < 0 or y < 0 for x, y in sites):
            raise ValueError("grid coordinates must be non-negative")
        if any(w < 1 for w in weights):
            raise ValueError("site weights must be >= 1")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(sites)})

    def __len__(self) -> int:
        return len(self.sites)

    def index(self, site: tuple[int, int]) -> int:
        return self._index[site]

    def __contains__(self, site) -> bool:
        return tuple(site) in self._index

    @classmethod
    def from_mapping(
        cls, family: LatticeFamily, weights: dict, unit: float | None = None
    ) -> "GridLayout":
        """Build from ``{site: weight}``; weight-0 sites are dropped."""
        items = sorted((s, w) for s, w in weights.items() if w != 0)
        return cls(family, tuple(s for s, _ in items), tuple(w for _, w in items), unit)

    def physical(self, a: float | None = None) -> np.ndarray:
        a = a if a is not None else (self.unit or 1.0)
        return np.array([to_physical(s, self.family, a) for s in self.sites]).reshape(-1, 2)

    def edges(self) -> list[tuple[int, int]]:
        return derive_edges(self)

    def translated(self, dx: int, dy: int) -> "GridLayout":
        if self.family.kind is LatticeKind.TRIANGULAR and dx % 2:
            raise ValueError("triangular layouts only translate by even columns")
        return GridLayout(
            self.family,
            tuple((x + dx, y + dy) for x, y in self.sites),
            self.weights,
            self.unit,
        )

    def to_dict(self) -> dict:
        return {
            "family": self.family.name,
            "unit": self.unit,
            "sites": [
                {"x": x, "y": y, "weight": w}
                for (x, y), w in zip(self.sites, self.weights)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridLayout":
        fam = family_from_name(data["family"])
        sites = tuple((int(s["x"]), int(s["y"])) for s in data["sites"])
        weights = tuple(int(s["weight"]) for s in data["sites"])
        return cls(fam, sites, weights, data.get("unit"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GridLayout":
        return cls.from_dict(json.loads(text))


def derive_edges(layout: GridLayout) -> list[tuple[int, int]]:
    """Unit-disk edges: pairs whose physical distance is at most ``r_max``.

    Returns sorted ``(i, j)`` index pairs with ``i < j``.
    """
    n = len(layout)
    if n == 0:
        return []
    pts = layout.physical(1.0)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    limit = layout.family.r_max * (1.0 + EPS_GEOM)
    ii, jj = np.nonzero(np.triu(dist <= limit, k=1))
    return sorted(zip(ii.tolist(), jj.tolist()))


def stencil_edges(layout: GridLayout) -> list[tuple[int, int]]:
    """Edges computed from the grid neighbor stencil instead of distances."""
    out = []
    for i, s in enumerate(layout.sites):
        for nb in layout.family.neighbors(s):
            j = layout._index.get(nb)
            if j is not None and j > i:
                out.append((i, j))
    return sorted(out)


def layout_to_svg(
    layout: GridLayout,
    highlight: Iterable[int] = (),
    scale: float = 40.0,
    labels: dict[int, str] | None = None,
) -> str:
    """Render a layout as SVG; weights map to grayscale, highlighted sites get a red frame."""
    pts = layout.physical(1.0) if len(layout) else np.zeros((0, 2))
    pad = 1.0
    if len(pts):
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
    else:
        lo, hi = np.zeros(2), np.ones(2)
    width, height = (hi - lo) * scale
    wmax = max(layout.weights, default=1)
    marked = set(highlight)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" '
        f'height="{height:.1f}" viewBox="0 0 {width:.1f} {height:.1f}">'
    ]
    for i, j in derive_edges(layout):
        (x1, y1), (x2, y2) = (pts[i] - lo) * scale, (pts[j] - lo) * scale
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            'stroke="#888" stroke-width="2"/>'
        )
    r = 0.3 * scale
    for k, w in enumerate(layout.weights):
        cx, cy = (pts[k] - lo) * scale
        level = int(round(230 - 200 * (w / wmax)))
        fill = f"rgb({level},{level},{level})"
        stroke = "red" if k in marked else "black"
        sw = 3 if k in marked else 1
        parts.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" fill="{fill}" '
            f'stroke="{stroke}" stroke-width="{sw}"/>'
        )
        text = labels.get(k, str(w)) if labels else str(w)
        color = "white" if level < 120 else "black"
        parts.append(
            f'<text x="{cx:.2f}" y="{cy + 4:.2f}" font-size="{0.35 * scale:.1f}" '
            f'text-anchor="middle" fill="{color}">{text}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def normalize_sites(
    sites: Sequence[tuple[int, int]], family: LatticeFamily
) -> tuple[int, int]:
    """Translation that moves ``sites`` to the non-negative quadrant with a
    minimal corner, respecting the column parity of the triangular lattice."""
    mx = min(x for x, _ in sites)
    my = min(y for _, y in sites)
    if family.kind is LatticeKind.TRIANGULAR and mx % 2:
        mx -= 1
    return -mx, -my
