"""Integer program for gadget vertex weights.

Given the maximal independent sets ``M`` of a candidate graph (rows of a 0/1
matrix) and a target subset ``M_min``, find integer weights
``0 <= w_i <= weight_cap`` such that every target row has the same energy
``w . n`` and every other row, the empty set included, sits at least one
unit below it. Strict inequalities become a unit margin, which is lossless
over the integers.

The solver is a depth-first branch and bound on top of LP relaxations
(HiGHS through :func:`scipy.optimize.linprog`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

INT_TOL = 1e-6


class ILPBudgetError(RuntimeError):
    """Branch and bound node limit exceeded."""


@dataclass
class WeightProgram:
    """Linear system ``A_eq w = 0``, ``A_ub w <= -1`` with box bounds."""

    n: int
    A_eq: np.ndarray
    A_ub: np.ndarray
    weight_cap: int
    objective: str = "sum"
    lower: tuple[int, ...] | None = None

    def lower_bounds(self) -> list[int]:
        return list(self.lower) if self.lower is not None else [0] * self.n

    @classmethod
    def build(
        cls,
        mis_matrix: np.ndarray,
        targets: Sequence[int],
        weight_cap: int,
        objective: str = "sum",
        lower: Sequence[int] | None = None,
    ) -> "WeightProgram":
        """``targets`` are row indices of ``mis_matrix`` forming ``M_min``.

        ``lower`` optionally raises the per-vertex lower bound (e.g. to keep pins).
        """
        M = np.asarray(mis_matrix, dtype=np.int64)
        if weight_cap < 1:
            raise ValueError("weight_cap must be >= 1")
        if objective not in ("sum", "max"):
            raise ValueError(f"unknown objective {objective!r}")
        targets = list(targets)
        if not targets:
            raise ValueError("target set must be nonempty")
        ref = M[targets[0]]
        tset = set(targets)
        A_eq = np.array([M[t] - ref for t in targets[1:]], dtype=np.int64).reshape(-1, M.shape[1])
        others = [r for r in range(M.shape[0]) if r not in tset]
        # the empty set counts as a non-target row, so targets carry energy >= 1
        A_ub = np.array([M[r] - ref for r in others] + [-ref], dtype=np.int64).reshape(-1, M.shape[1])
        if lower is not None:
            lower = tuple(int(v) for v in lower)
            if len(lower) != M.shape[1] or any(not 0 <= v <= weight_cap for v in lower):
                raise ValueError("lower bounds must lie in [0, weight_cap]")
        return cls(M.shape[1], A_eq, A_ub, weight_cap, objective, lower)

    def is_feasible_point(self, w: Sequence[int]) -> bool:
        w = np.asarray(w, dtype=np.int64)
        if np.any(w < np.asarray(self.lower_bounds())) or w.max(initial=0) > self.weight_cap:
            return False
        if self.A_eq.size and np.any(self.A_eq @ w != 0):
            return False
        if self.A_ub.size and np.any(self.A_ub @ w > -1):
            return False
        return True

    def objective_value(self, w: Sequence[int]) -> int:
        w = list(w)
        if self.objective == "sum":
            return int(sum(w))
        # lexicographic (max, sum) packed into one integer
        return int(max(w) * (self.n * self.weight_cap + 1) + sum(w))


def _lp_arrays(prog: WeightProgram):
    n = prog.n
    if prog.objective == "sum":
        c = np.ones(n)
        A_ub = prog.A_ub.astype(float) if prog.A_ub.size else None
        b_ub = -np.ones(prog.A_ub.shape[0]) if prog.A_ub.size else None
        A_eq = prog.A_eq.astype(float) if prog.A_eq.size else None
        b_eq = np.zeros(prog.A_eq.shape[0]) if prog.A_eq.size else None
        return c, A_ub, b_ub, A_eq, b_eq, n
    # extra variable t >= w_i
    big = prog.n * prog.weight_cap + 1
    c = np.concatenate([np.ones(n), [big]])
    rows, rhs = [], []
    for r in prog.A_ub:
        rows.append(np.concatenate([r, [0]]))
        rhs.append(-1.0)
    for i in range(n):
        e = np.zeros(n + 1)
        e[i], e[n] = 1.0, -1.0
        rows.append(e)
        rhs.append(0.0)
    A_ub = np.array(rows, dtype=float)
    b_ub = np.array(rhs)
    A_eq = np.hstack([prog.A_eq, np.zeros((prog.A_eq.shape[0], 1))]).astype(float) if prog.A_eq.size else None
    b_eq = np.zeros(prog.A_eq.shape[0]) if prog.A_eq.size else None
    return c, A_ub, b_ub, A_eq, b_eq, n + 1


def _box(prog: WeightProgram, nv: int) -> list[tuple[float, float]]:
    cap = float(prog.weight_cap)
    box = [(float(lo), cap) for lo in prog.lower_bounds()]
    return box + [(0.0, cap)] * (nv - prog.n)


def lp_feasible(prog: WeightProgram) -> bool:
    """Feasibility of the continuous relaxation."""
    c, A_ub, b_ub, A_eq, b_eq, nv = _lp_arrays(prog)
    res = linprog(
        np.zeros(nv), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=_box(prog, nv), method="highs",
    )
    return res.status == 0


def solve_weight_program(
    prog: WeightProgram, node_limit: int = 20_000
) -> list[int] | None:
    """Optimal integer weights, or ``None`` when infeasible."""
    c, A_ub, b_ub, A_eq, b_eq, nv = _lp_arrays(prog)
    best: list[int] | None = None
    best_val = math.inf
    stack = [_box(prog, nv)]
    nodes = 0
    while stack:
        bounds = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise ILPBudgetError(f"weight program exceeded {node_limit} nodes")
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status != 0:
            continue
        # objective is integral at integer points
        if math.ceil(res.fun - INT_TOL) >= best_val:
            continue
        x = res.x
        frac = np.abs(x - np.round(x))
        j = int(np.argmax(frac))
        if frac[j] <= INT_TOL:
            w = [int(round(v)) for v in x[: prog.n]]
            if prog.is_feasible_point(w):
                val = prog.objective_value(w)
                if val < best_val:
                    best, best_val = w, val
                continue
            # rounding an integral LP point cannot break integer constraints
            # beyond solver tolerance; treat as dead node
            continue
        lo, hi = bounds[j]
        down = list(bounds)
        down[j] = (lo, float(math.floor(x[j])))
        up = list(bounds)
        up[j] = (float(math.floor(x[j]) + 1), hi)
        # explore the branch nearer to the LP value first
        if x[j] - math.floor(x[j]) >= 0.5:
            stack.extend([down, up])
        else:
            stack.extend([up, down])
    return best


def formulate_and_solve(
    mis_matrix: np.ndarray,
    targets: Sequence[int],
    weight_cap: int = 6,
    objective: str = "sum",
    node_limit: int = 20_000,
    lower: Sequence[int] | None = None,
) -> list[int] | None:
    """Weights realizing ``targets`` as the exact MWIS set among ``mis_matrix`` rows."""
    prog = WeightProgram.build(mis_matrix, targets, weight_cap, objective, lower)
    return solve_weight_program(prog, node_limit)


def exhaustive_weights(
    mis_matrix: np.ndarray,
    targets: Sequence[int],
    weight_cap: int,
    objective: str = "sum",
    lower: Sequence[int] | None = None,
) -> list[int] | None:
    """Reference solver: scan every weight vector in ``{0..cap}^n``."""
    prog = WeightProgram.build(mis_matrix, targets, weight_cap, objective, lower)
    n = prog.n
    grid = np.array(list(itertools.product(range(weight_cap + 1), repeat=n)), dtype=np.int64)
    ok = np.all(grid >= np.asarray(prog.lower_bounds()), axis=1)
    if prog.A_eq.size:
        ok &= np.all(grid @ prog.A_eq.T == 0, axis=1)
    if prog.A_ub.size:
        ok &= np.all(grid @ prog.A_ub.T <= -1, axis=1)
    if not ok.any():
        return None
    cand = grid[ok]
    if objective == "sum":
        vals = cand.sum(axis=1)
    else:
        vals = cand.max(axis=1) * (n * weight_cap + 1) + cand.sum(axis=1)
    return [int(v) for v in cand[int(np.argmin(vals))]]
