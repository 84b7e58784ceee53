"""Boolean constraints given by their satisfying assignments."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

Bits = tuple[int, ...]

MAX_ARITY = 6


@dataclass(frozen=True)
class LogicalConstraint:
    """A ``k``-variable constraint defined by its satisfying set."""

    k: int
    satisfying: frozenset
    name: str = ""

    def __post_init__(self):
        sat = frozenset(tuple(int(b) for b in row) for row in self.satisfying)
        object.__setattr__(self, "satisfying", sat)
        if not 1 <= self.k <= MAX_ARITY:
            raise ValueError(f"arity must be in 1..{MAX_ARITY}, got {self.k}")
        if not sat:
            raise ValueError("satisfying set must be nonempty")
        for row in sat:
            if len(row) != self.k or any(b not in (0, 1) for b in row):
                raise ValueError(f"bad assignment {row} for arity {self.k}")
        if len(sat) == 2**self.k:
            raise ValueError("constraint admits every assignment; no gadget needed")

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int] | str], name: str = "") -> "LogicalConstraint":
        parsed = [tuple(int(c) for c in r) for r in rows]
        if not parsed:
            raise ValueError("satisfying set must be nonempty")
        return cls(len(parsed[0]), frozenset(parsed), name)

    def rows(self) -> list[Bits]:
        return sorted(self.satisfying)

    def to_dict(self) -> dict:
        return {"name": self.name, "k": self.k, "rows": [list(r) for r in self.rows()]}

    @classmethod
    def from_dict(cls, data: dict) -> "LogicalConstraint":
        return cls(int(data["k"]), frozenset(tuple(r) for r in data["rows"]), data.get("name", ""))

    def __contains__(self, bits) -> bool:
        return tuple(bits) in self.satisfying

    def __str__(self) -> str:
        body = ",".join("".join(map(str, r)) for r in self.rows())
        return f"{self.name or 'L'}{{{body}}}"


def conjunction(
    l1: LogicalConstraint,
    vars1: Sequence[int],
    l2: LogicalConstraint,
    vars2: Sequence[int],
    nvars: int,
) -> set[Bits]:
    """Assignments of ``nvars`` variables satisfying both constraints.

    ``vars1[i]`` names the variable carried by pin ``i`` of ``l1``.
    """
    out = set()
    for bits in itertools.product((0, 1), repeat=nvars):
        if tuple(bits[v] for v in vars1) in l1 and tuple(bits[v] for v in vars2) in l2:
            out.add(bits)
    return out


def _gate(name: str, fn) -> LogicalConstraint:
    rows = [(a, b, fn(a, b)) for a in (0, 1) for b in (0, 1)]
    return LogicalConstraint(3, frozenset(rows), name)


AND = _gate("AND", lambda a, b: a & b)
NAND = _gate("NAND", lambda a, b: 1 - (a & b))
OR = _gate("OR", lambda a, b: a | b)
NOR = _gate("NOR", lambda a, b: 1 - (a | b))
XOR = _gate("XOR", lambda a, b: a ^ b)

GATES = {g.name: g for g in (AND, NAND, OR, NOR, XOR)}

NOT = LogicalConstraint(2, frozenset({(0, 1), (1, 0)}), "NOT")


def load_truth_tables(path: str) -> list[LogicalConstraint]:
    """Read constraints from JSON.

    Accepts one bit matrix (rows are satisfying assignments), a list of
    them, or a mapping ``name -> bit matrix``.
    """
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        items = list(data.items())
    elif data and all(isinstance(b, int) for b in data[0]):
        items = [("L0", data)]
    else:
        items = [(f"L{i}", rows) for i, rows in enumerate(data)]
    out = []
    for name, rows in items:
        if isinstance(rows, dict):
            out.append(LogicalConstraint.from_dict({"name": name, **rows}))
        else:
            out.append(LogicalConstraint.from_rows(rows, name))
    return out


def _crossing(edge: bool) -> LogicalConstraint:
    # pins ordered (a, a', b, b'); the two pins of a variable carry equal bits
    rows = {(a, a, b, b) for a in (0, 1) for b in (0, 1) if not (edge and a and b)}
    return LogicalConstraint(4, frozenset(rows), "CROSS_EDGE" if edge else "CROSS")


CROSS = _crossing(False)
CROSS_EDGE = _crossing(True)
