"""Exact maximal independent set enumeration and MWIS solving.

Configurations are tuples of 0/1 ints of length ``n``. Every function that
returns several configurations returns them sorted lexicographically.

Two exact MWIS engines are provided:

* :func:`branch_and_bound` -- clique-cover bounded search with simplicial
  reductions and component splitting; general purpose.
* :func:`elimination_solve` -- max-sum variable elimination along a min-fill
  order; fast on sparse lattice encodings whose elimination width is small.

:func:`solve_mwis` picks between them.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

Configuration = tuple[int, ...]

DEFAULT_ENUM_CAP = 30
DEFAULT_NODE_BUDGET = 5_000_000
DEFAULT_MAX_WIDTH = 18


class EnumerationCapError(ValueError):
    """Graph too large for exhaustive maximal-IS enumeration."""


class SolverBudgetError(RuntimeError):
    """Branch and bound exceeded its node budget.

    ``bound`` is the best objective value found before stopping.
    """

    def __init__(self, message: str, bound: int | None = None):
        super().__init__(message)
        self.bound = bound


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    weights: tuple[int, ...]
    edges: frozenset

    def __init__(self, n: int, weights: Sequence[int] | None = None, edges: Iterable = ()):
        weights = tuple(int(w) for w in (weights if weights is not None else [1] * n))
        if len(weights) != n:
            raise ValueError("need one weight per vertex")
        if any(w < 1 for w in weights):
            raise ValueError("weights must be positive integers")
        es = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            es.add((min(u, v), max(u, v)))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "edges", frozenset(es))

    def neighbor_masks(self) -> list[int]:
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def weight_of(self, c: Sequence[int]) -> int:
        return sum(w for w, b in zip(self.weights, c) if b)

    def is_independent(self, c: Sequence[int]) -> bool:
        return violation_count(self, c) == 0

    def with_weights(self, weights: Sequence[int]) -> "WeightedGraph":
        return WeightedGraph(self.n, weights, self.edges)

    def induced(self, keep: Sequence[int]) -> "WeightedGraph":
        pos = {v: i for i, v in enumerate(keep)}
        edges = [(pos[u], pos[v]) for u, v in self.edges if u in pos and v in pos]
        return WeightedGraph(len(keep), [self.weights[v] for v in keep], edges)

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        for v, w in enumerate(self.weights):
            g.add_node(v, weight=w)
        g.add_edges_from(sorted(self.edges))
        return g

    @classmethod
    def from_networkx(cls, g, weight: str = "weight") -> "WeightedGraph":
        nodes = sorted(g.nodes())
        pos = {v: i for i, v in enumerate(nodes)}
        weights = [int(g.nodes[v].get(weight, 1)) for v in nodes]
        return cls(len(nodes), weights, [(pos[u], pos[v]) for u, v in g.edges()])


def violation_count(g: WeightedGraph, c: Sequence[int]) -> int:
    """Number of edges with both endpoints set in ``c``."""
    if len(c) != g.n:
        raise ValueError("configuration length does not match graph")
    return sum(1 for u, v in g.edges if c[u] and c[v])


def _mask_to_config(mask: int, n: int) -> Configuration:
    return tuple((mask >> i) & 1 for i in range(n))


def config_to_mask(c: Sequence[int]) -> int:
    m = 0
    for i, b in enumerate(c):
        if b:
            m |= 1 << i
    return m


# -- maximal independent sets -------------------------------------------------


def maximal_independent_sets(
    g: WeightedGraph, cap: int = DEFAULT_ENUM_CAP
) -> list[Configuration]:
    """All maximal independent sets, as maximal cliques of the complement.

    Bron-Kerbosch with Tomita pivoting over bitsets.
    """
    if g.n < 1:
        raise ValueError("graph must have at least one vertex")
    if g.n > cap:
        raise EnumerationCapError(
            f"{g.n} vertices exceeds the enumeration cap {cap}; use solve_mwis"
        )
    return sorted(_mask_to_config(m, g.n) for m in maximal_is_masks(g))


def maximal_is_masks(g: WeightedGraph) -> Iterator[int]:
    full = (1 << g.n) - 1
    nbr = g.neighbor_masks()
    # neighbors in the complement graph
    comp = [full & ~nbr[v] & ~(1 << v) for v in range(g.n)]

    def expand(r: int, p: int, x: int):
        if not p and not x:
            yield r
            return
        px = p | x
        # pivot maximizing |P & N(u)|
        best, pivot = -1, 0
        while px:
            low = px & -px
            u = low.bit_length() - 1
            cnt = (p & comp[u]).bit_count()
            if cnt > best:
                best, pivot = cnt, u
            px ^= low
        cand = p & ~comp[pivot]
        while cand:
            low = cand & -cand
            v = low.bit_length() - 1
            yield from expand(r | low, p & comp[v], x & comp[v])
            p &= ~low
            x |= low
            cand ^= low

    yield from expand(0, full, 0)


# -- brute force oracle -------------------------------------------------------


def brute_force_mwis(g: WeightedGraph) -> tuple[int, list[Configuration]]:
    """Exhaustive MWIS over all 2**n configurations (test oracle, n <= ~20)."""
    n = g.n
    bits = ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
    ok = np.ones(1 << n, dtype=bool)
    for u, v in g.edges:
        ok &= ~((bits[:, u] == 1) & (bits[:, v] == 1))
    energy = bits @ np.asarray(g.weights, dtype=np.int64)
    energy[~ok] = -1
    best = int(energy.max())
    idx = np.nonzero(energy == best)[0]
    return best, sorted(tuple(int(b) for b in bits[i]) for i in idx)


def brute_force_maximal(g: WeightedGraph) -> list[Configuration]:
    """Maximal independent sets by filtering all 2**n bitstrings."""
    out = []
    adj = g.adjacency()
    for c in itertools.product((0, 1), repeat=g.n):
        if violation_count(g, c):
            continue
        if all(c[v] or any(c[u] for u in adj[v]) for v in range(g.n)):
            out.append(c)
    return sorted(out)


# -- branch and bound ---------------------------------------------------------


def _components(vertices: int, nbr: list[int]) -> list[int]:
    comps = []
    rest = vertices
    while rest:
        low = rest & -rest
        comp = low
        frontier = low
        while frontier:
            f = frontier & -frontier
            frontier ^= f
            new = nbr[f.bit_length() - 1] & rest & ~comp
            comp |= new
            frontier |= new
        comps.append(comp)
        rest &= ~comp
    return comps


def _iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class _BranchAndBound:
    def __init__(self, g: WeightedGraph, node_budget: int, max_solutions: int):
        self.w = g.weights
        self.nbr = g.neighbor_masks()
        self.nodes = 0
        self.budget = node_budget
        self.max_solutions = max_solutions

    def bound(self, cand: int) -> int:
        # greedy weighted clique cover, heaviest vertices first
        order = sorted(_iter_bits(cand), key=lambda v: -self.w[v])
        cliques: list[list[int]] = []  # [mask, max weight]
        total = 0
        for v in order:
            for cl in cliques:
                if cl[0] & ~self.nbr[v] == 0:
                    cl[0] |= 1 << v
                    break
            else:
                cliques.append([1 << v, self.w[v]])
                total += self.w[v]
        return total

    def solve(self, cand: int) -> tuple[int, list[int]]:
        """Best weight and all optimal sets (bitmasks) inside ``cand``."""
        if not cand:
            return 0, [0]
        forced = 0
        changed = True
        while changed and cand:
            changed = False
            for v in _iter_bits(cand):
                if not (cand >> v) & 1:
                    continue
                nb = self.nbr[v] & cand
                if nb == 0:
                    forced |= 1 << v
                    cand &= ~(1 << v)
                    changed = True
                    continue
                # simplicial vertex strictly heavier than its clique is in every optimum
                if all(self.w[v] > self.w[u] for u in _iter_bits(nb)) and all(
                    (nb & ~self.nbr[u] & ~(1 << u)) == 0 for u in _iter_bits(nb)
                ):
                    forced |= 1 << v
                    cand &= ~(nb | (1 << v))
                    changed = True
        base = sum(self.w[v] for v in _iter_bits(forced))
        comps = _components(cand, self.nbr)
        if len(comps) > 1:
            total, sols = base, [forced]
            for comp in comps:
                bw, bs = self._search(comp)
                total += bw
                sols = [a | b for a in sols for b in bs]
                if len(sols) > self.max_solutions:
                    sols = sorted(sols)[: self.max_solutions]
            return total, sols
        if not cand:
            return base, [forced]
        bw, bs = self._search(cand)
        return base + bw, [forced | s for s in bs]

    def _search(self, cand: int) -> tuple[int, list[int]]:
        best = [-1]
        sols: list[int] = []

        def rec(chosen: int, weight: int, rest: int):
            self.nodes += 1
            if self.nodes > self.budget:
                raise SolverBudgetError(
                    f"node budget {self.budget} exceeded", bound=max(best[0], 0)
                )
            if not rest:
                if weight > best[0]:
                    best[0] = weight
                    sols.clear()
                if weight == best[0] and len(sols) < self.max_solutions:
                    sols.append(chosen)
                return
            if weight + self.bound(rest) < best[0]:
                return
            comps = _components(rest, self.nbr)
            if len(comps) > 1:
                sub_w = 0
                sub_s = [0]
                for comp in comps:
                    cw, cs = self.solve(comp)
                    sub_w += cw
                    sub_s = [a | b for a in sub_s for b in cs]
                total = weight + sub_w
                if total > best[0]:
                    best[0] = total
                    sols.clear()
                if total == best[0]:
                    for s in sub_s:
                        if len(sols) >= self.max_solutions:
                            break
                        sols.append(chosen | s)
                return
            # branch on the vertex of maximum degree within rest
            v = max(_iter_bits(rest), key=lambda u: ((self.nbr[u] & rest).bit_count(), self.w[u]))
            rec(chosen | (1 << v), weight + self.w[v], rest & ~self.nbr[v] & ~(1 << v))
            rest_wo = rest & ~(1 << v)
            # without v, some neighbor of v must be taken (maximality); prune if none available
            if self.nbr[v] & rest_wo:
                rec(chosen, weight, rest_wo)

        rec(0, 0, cand)
        return best[0], sols


def branch_and_bound(
    g: WeightedGraph,
    node_budget: int = DEFAULT_NODE_BUDGET,
    max_solutions: int = 10_000,
) -> tuple[int, list[Configuration]]:
    """Exact MWIS by branch and bound; returns the weight and all optima."""
    bb = _BranchAndBound(g, node_budget, max_solutions)
    weight, masks = bb.solve((1 << g.n) - 1)
    masks = _keep_maximal(masks, bb.nbr, g.n)
    return weight, sorted(_mask_to_config(m, g.n) for m in set(masks))


def _keep_maximal(masks: list[int], nbr: list[int], n: int) -> list[int]:
    full = (1 << n) - 1
    out = []
    for m in masks:
        covered = m
        for v in _iter_bits(m):
            covered |= nbr[v]
        if covered == full:
            out.append(m)
    return out


# -- variable elimination -----------------------------------------------------

_NEG = -(1 << 40)


def min_fill_order(n: int, adj: list[set[int]]) -> tuple[list[int], int]:
    """Greedy min-fill elimination order and its width (max clique size - 1)."""
    adj = [set(a) for a in adj]
    alive = set(range(n))
    order, width = [], 0
    while alive:
        best, best_key = None, None
        for v in alive:
            nb = adj[v]
            fill = 0
            nbl = list(nb)
            for i in range(len(nbl)):
                ai = adj[nbl[i]]
                for j in range(i + 1, len(nbl)):
                    if nbl[j] not in ai:
                        fill += 1
            key = (fill, len(nb), v)
            if best_key is None or key < best_key:
                best, best_key = v, key
        nb = adj[best]
        width = max(width, len(nb))
        for u in nb:
            adj[u] |= nb - {u}
            adj[u].discard(best)
        alive.remove(best)
        order.append(best)
    return order, width


class _Factor:
    __slots__ = ("scope", "table")

    def __init__(self, scope: tuple[int, ...], table: np.ndarray):
        self.scope = scope
        self.table = table


def _expand(f: _Factor, scope: tuple[int, ...]) -> np.ndarray:
    # reorder/broadcast f.table onto the axes of `scope`
    perm = sorted(range(len(f.scope)), key=lambda i: scope.index(f.scope[i]))
    t = np.transpose(f.table, perm) if f.table.ndim > 1 else f.table
    present = sorted(scope.index(v) for v in f.scope)
    shape = [1] * len(scope)
    for ax in present:
        shape[ax] = 2
    return t.reshape(shape)


def elimination_solve(
    g: WeightedGraph,
    max_width: int = DEFAULT_MAX_WIDTH,
    max_solutions: int = 10_000,
    order: list[int] | None = None,
) -> tuple[int, list[Configuration]]:
    """Exact MWIS by max-sum variable elimination, with all optima recovered."""
    adj = g.adjacency()
    if order is None:
        order, width = min_fill_order(g.n, adj)
    else:
        width = 0
    if width > max_width:
        raise SolverBudgetError(f"elimination width {width} exceeds {max_width}")
    pos = {v: i for i, v in enumerate(order)}
    buckets: dict[int, list[_Factor]] = {v: [] for v in range(g.n)}

    def place(f: _Factor):
        if not f.scope:
            const.append(int(f.table))
            return
        first = min(f.scope, key=pos.__getitem__)
        buckets[first].append(f)

    const: list[int] = []
    for v in range(g.n):
        place(_Factor((v,), np.array([0, g.weights[v]], dtype=np.int64)))
    for u, v in g.edges:
        place(_Factor((u, v), np.array([[0, 0], [0, _NEG]], dtype=np.int64)))

    saved: list[tuple[int, tuple[int, ...], np.ndarray]] = []
    for v in order:
        fs = buckets.pop(v)
        scope_set = set()
        for f in fs:
            scope_set.update(f.scope)
        rest = tuple(sorted(scope_set - {v}, key=pos.__getitem__))
        if len(rest) > max_width:
            raise SolverBudgetError(f"elimination width exceeds {max_width}")
        scope = (v,) + rest
        table = np.zeros([2] * len(scope), dtype=np.int64)
        for f in fs:
            table = table + _expand(f, scope)
        np.maximum(table, _NEG, out=table)
        saved.append((v, rest, table))
        msg = table.max(axis=0)
        place(_Factor(rest, msg))

    best = sum(const)
    if best <= _NEG // 2:
        raise RuntimeError("no independent configuration found")

    # backtrack all optimal assignments in reverse elimination order
    results: list[Configuration] = []
    assign = [0] * g.n

    def back(k: int):
        if len(results) >= max_solutions:
            return
        if k < 0:
            results.append(tuple(assign))
            return
        v, rest, table = saved[k]
        sub = table[(slice(None),) + tuple(assign[u] for u in rest)]
        top = sub.max()
        for val in (0, 1):
            if sub[val] == top:
                assign[v] = val
                back(k - 1)
        assign[v] = 0

    back(len(saved) - 1)
    return int(best), sorted(results)


def solve_mwis(
    g: WeightedGraph,
    method: str = "auto",
    node_budget: int = DEFAULT_NODE_BUDGET,
    max_width: int = DEFAULT_MAX_WIDTH,
    max_solutions: int = 10_000,
) -> tuple[int, list[Configuration]]:
    """Maximum weight and every optimal configuration of ``g``.

    ``method`` is ``"bnb"``, ``"elimination"`` or ``"auto"`` (elimination when
    the min-fill width is at most ``max_width``, otherwise branch and bound).
    """
    if g.n < 1:
        raise ValueError("graph must have at least one vertex")
    if method == "bnb":
        return branch_and_bound(g, node_budget, max_solutions)
    if method == "elimination":
        return elimination_solve(g, max_width, max_solutions)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if g.n <= 24:
        return branch_and_bound(g, node_budget, max_solutions)
    order, width = min_fill_order(g.n, g.adjacency())
    if width <= max_width:
        return elimination_solve(g, max_width, max_solutions, order=order)
    return branch_and_bound(g, node_budget, max_solutions)


# -- I/O ----------------------------------------------------------------------


def read_graph6(path: str) -> list[WeightedGraph]:
    """All graphs of a ``.g6`` file as unit-weight graphs."""
    import networkx as nx

    out = []
    with open(path, "rb") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith(b">>graph6<<"):
                line = line[len(b">>graph6<<"):]
            if not line:
                continue
            out.append(WeightedGraph.from_networkx(nx.from_graph6_bytes(line)))
    return out


def to_graph6(g: WeightedGraph) -> str:
    import networkx as nx

    return nx.to_graph6_bytes(g.to_networkx(), header=False).decode().strip()


def from_graph6(text: str) -> WeightedGraph:
    import networkx as nx

    return WeightedGraph.from_networkx(nx.from_graph6_bytes(text.strip().encode()))


def solution_to_json(weight: int, solutions: Sequence[Configuration]) -> str:
    return json.dumps(
        {"weight": weight, "solutions": ["".join(map(str, s)) for s in solutions]}
    )
