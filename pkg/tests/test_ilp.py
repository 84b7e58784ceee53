import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tlsg.ilp import ILPBudgetError, WeightProgram, exhaustive_weights, formulate_and_solve
from tlsg.mwis import WeightedGraph
from tlsg.search import mis_matrix

NOT_M = np.array([[0, 1], [1, 0]])


@st.composite
def programs(draw):
    n = draw(st.integers(2, 6))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, min_size=1))
    M = mis_matrix(WeightedGraph(n, None, edges))
    rows = list(range(M.shape[0]))
    targets = draw(st.lists(st.sampled_from(rows), unique=True, min_size=1))
    return M, targets


def test_not_gadget_identical_weights():
    assert formulate_and_solve(NOT_M, [0, 1], weight_cap=4) == [1, 1]


def test_single_target_prefers_it():
    w = formulate_and_solve(NOT_M, [1], weight_cap=4)
    assert w == [1, 0]


def test_infeasible_returns_none():
    # two disjoint edges: {0,2}+{1,3} equals {0,3}+{1,2} as vectors, so no weights separate them
    M = mis_matrix(WeightedGraph(4, None, [(0, 1), (2, 3)]))
    rows = [tuple(r) for r in M.tolist()]
    targets = [rows.index((1, 0, 1, 0)), rows.index((0, 1, 0, 1))]
    assert formulate_and_solve(M, targets, weight_cap=8) is None
    assert exhaustive_weights(M, targets, weight_cap=3) is None


def test_triangle_single_target():
    M = mis_matrix(WeightedGraph(3, None, [(0, 1), (1, 2), (0, 2)]))
    rows = [tuple(r) for r in M.tolist()]
    t = rows.index((1, 0, 0))
    prog = WeightProgram.build(M, [t], 4)
    assert prog.is_feasible_point([2, 1, 1])
    w = formulate_and_solve(M, [t], weight_cap=4)
    # the two losing vertices end up weightless and removable
    assert w == [1, 0, 0]


def test_feasible_point_check():
    prog = WeightProgram.build(NOT_M, [0, 1], 4)
    assert prog.is_feasible_point([2, 2])
    assert not prog.is_feasible_point([0, 0])
    assert not prog.is_feasible_point([5, 5])


def test_lower_bounds_respected():
    w = formulate_and_solve(NOT_M, [1], weight_cap=4, lower=[0, 2])
    assert w == [3, 2]


def test_bad_arguments():
    with pytest.raises(ValueError):
        WeightProgram.build(NOT_M, [0], 0)
    with pytest.raises(ValueError):
        WeightProgram.build(NOT_M, [], 2)
    with pytest.raises(ValueError):
        WeightProgram.build(NOT_M, [0], 2, lower=[3, 0])


def test_node_limit():
    M = mis_matrix(WeightedGraph(8, None, [(i, (i + 1) % 8) for i in range(8)]))
    with pytest.raises(ILPBudgetError):
        formulate_and_solve(M, [0, 3, 5], weight_cap=6, node_limit=0)


@given(programs(), st.integers(1, 4), st.sampled_from(["sum", "max"]))
def test_matches_exhaustive(prog, cap, objective):
    M, targets = prog
    got = formulate_and_solve(M, targets, cap, objective)
    want = exhaustive_weights(M, targets, cap, objective)
    assert (got is None) == (want is None)
    if got is not None:
        p = WeightProgram.build(M, targets, cap, objective)
        assert p.is_feasible_point(got)
        assert p.objective_value(got) == p.objective_value(want)


@given(programs(), st.integers(1, 3))
def test_matches_independent_oracle(prog, cap):
    M, targets = prog
    got = formulate_and_solve(M, targets, cap)
    want = oracles.gadget_weights(M, targets, cap)
    assert (got is None) == (want is None)
    if got is not None:
        assert sum(got) == want
