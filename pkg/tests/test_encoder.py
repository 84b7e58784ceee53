from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tlsg.encoder import (
    EncodingResult,
    SourceProblem,
    apply_weights,
    build_crossing_lattice,
    decode,
    encode,
    overhead_estimate,
    replace_gadgets,
    slot_aware_overhead,
    trim,
    verify,
)
from tlsg.gadget import GeometryError
from tlsg.lattice import KING, TRIANGULAR, derive_edges
from tlsg.mwis import solve_mwis


def connected_atlas(max_n):
    return [g for g in nx.graph_atlas_g()[1:] if g.number_of_nodes() <= max_n and nx.is_connected(g)]


K23 = SourceProblem.from_networkx(nx.complete_bipartite_graph(2, 3))
K4 = SourceProblem.from_networkx(nx.complete_graph(4))
K2 = SourceProblem(2, ((0, 1),))


def oracle_optimum(p):
    return oracles.mwis(p.n, p.edges, p.vertex_weights())


def decoded_optima(res):
    best, sols = solve_mwis(res.graph())
    # the optimum value itself comes from an independent geometry and solver
    edges = sorted(oracles.distance_edges(res.layout.sites, res.layout.family.name))
    assert oracles.milp_mwis_weight(len(res.layout), edges, res.layout.weights) == best
    return {decode(res, s) for s in sols}


class TestCrossingLattice:
    def test_k4_slot_table(self):
        table = build_crossing_lattice(K4).slot_table()
        assert table[0] == {"vertex": 1, "vslot": None, "vrange": None, "hslot": 1, "hrange": (1, 4)}
        assert table[3] == {"vertex": 4, "vslot": 4, "vrange": (1, 4), "hslot": None, "hrange": None}
        assert table[1]["vrange"] == (1, 2) and table[1]["hrange"] == (2, 4)

    def test_k2(self):
        cl = build_crossing_lattice(K2)
        assert len(cl.copy_lines) == 2
        assert [j.has_edge for j in cl.junctions] == [True]

    def test_k23(self):
        cl = build_crossing_lattice(K23)
        assert len(cl.copy_lines) == 5
        assert len(cl.junctions) == 10
        assert sum(j.has_edge for j in cl.junctions) == 6

    @given(st.integers(2, 9), st.data())
    def test_each_pair_meets_once(self, n, data):
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        edges = data.draw(st.lists(st.sampled_from(pairs), unique=True))
        cl = build_crossing_lattice(SourceProblem(n, tuple(edges)))
        seen = [(j.row_vertex, j.col_vertex) for j in cl.junctions]
        assert sorted(seen) == pairs
        assert {s for s, j in zip(seen, cl.junctions) if j.has_edge} == set(edges)

    def test_cell_sizes(self):
        assert build_crossing_lattice(K4, TRIANGULAR).cell_size == 6
        assert build_crossing_lattice(K4, KING).cell_size == 4


class TestWeights:
    def test_k23_quarter_shift(self):
        raw = trim(replace_gadgets(build_crossing_lattice(K23)))
        res = apply_weights(raw, K23, Fraction(1, 4), scale=4)
        _, sols = solve_mwis(res.graph())
        assert len(sols) == 1
        assert decode(res, sols[0]) == (0, 0, 1, 1, 1)

    def test_weighted_edge_prefers_heavy_vertex(self):
        p = SourceProblem(2, ((0, 1),), (2, 1))
        res = encode(p)
        _, sols = solve_mwis(res.graph())
        assert {decode(res, s) for s in sols} == {(1, 0)}

    def test_epsilon_bounds(self):
        raw = replace_gadgets(build_crossing_lattice(K2))
        with pytest.raises(ValueError):
            apply_weights(raw, K2, Fraction(1))
        with pytest.raises(ValueError):
            apply_weights(raw, K2, Fraction(-1, 8))
        with pytest.raises(ValueError):
            apply_weights(raw, SourceProblem(2, ((0, 1),), (4, 1)), Fraction(1, 4), scale=4)

    def test_zero_epsilon_single_wire_is_two_fold(self):
        res = encode(SourceProblem(1, ()), epsilon=Fraction(0))
        _, sols = solve_mwis(res.graph())
        assert len(sols) == 2
        assert {decode(res, s) for s in sols} == {(0,), (1,)}

    def test_default_scale(self):
        res = encode(K4)
        assert res.scale == 16 and res.epsilon == Fraction(1, 16)


class TestTrim:
    def test_shrinks_and_is_idempotent(self):
        raw = replace_gadgets(build_crossing_lattice(K23))
        once = trim(raw)
        assert once.site_count() <= raw.site_count()
        assert (raw.site_count() - once.site_count()) % 2 == 0
        twice = trim(once)
        assert twice.weight == once.weight and twice.base_energy == once.base_energy

    def test_trimmed_still_verifies(self):
        assert verify(encode(K23, do_trim=True)).ok
        assert verify(encode(K23, do_trim=False)).ok


class TestDecode:
    def test_all_zero(self):
        res = encode(K23)
        assert decode(res, [0] * len(res.layout)) == (0,) * 5

    def test_k23(self):
        assert decoded_optima(encode(K23)) == {(0, 0, 1, 1, 1)}

    def test_k4_single_vertex(self):
        for d in decoded_optima(encode(K4)):
            assert sum(d) == 1

    def test_ground_states_agree_along_wires(self):
        res = encode(K4)
        _, sols = solve_mwis(res.graph())
        for s in sols:
            for sites in res.pin_map.values():
                assert len({s[i] for i in sites}) == 1


class TestOverhead:
    def test_examples(self):
        assert overhead_estimate(4, 6) == 86
        assert overhead_estimate(2, 1) == 17
        assert overhead_estimate(5, 0) == 8 * 25 - 30
        assert overhead_estimate(10, 15) == 695
        assert overhead_estimate(4, 6, KING) == 64

    def test_slot_aware(self):
        for n in range(2, 8):
            for m in range(0, n * (n - 1) // 2 + 1):
                assert slot_aware_overhead(n, m) == 8 * n * n - 8 * n - 3 * m
                assert slot_aware_overhead(n, m) <= overhead_estimate(n, m)

    def test_range(self):
        with pytest.raises(ValueError):
            overhead_estimate(3, 4)

    def test_k4_actual(self):
        assert len(encode(K4).layout) <= 86


class TestRoundTrip:
    @pytest.mark.parametrize("g", connected_atlas(4), ids=lambda g: nx.to_graph6_bytes(g, header=False).decode().strip())
    def test_small_graphs(self, g):
        p = SourceProblem.from_networkx(g)
        res = encode(p)
        v = verify(res)
        assert v.ok, v.message
        best, _ = oracle_optimum(p)
        assert v.source_energy == best
        # the encoded energy from an independent geometry and solver
        edges = sorted(oracles.distance_edges(res.layout.sites, "triangular"))
        assert oracles.milp_mwis_weight(len(res.layout), edges, res.layout.weights) == v.encoded_energy
        assert len(res.layout) <= overhead_estimate(p.n, p.m)

    @pytest.mark.parametrize("g", connected_atlas(4), ids=lambda g: nx.to_graph6_bytes(g, header=False).decode().strip())
    def test_completeness(self, g):
        p = SourceProblem.from_networkx(g)
        _, maxima = oracle_optimum(p)
        assert decoded_optima(encode(p)) == set(maxima)
        every = oracles.all_independent(p.n, p.edges)
        assert decoded_optima(encode(p, epsilon=Fraction(0))) == set(every)

    @settings(max_examples=15)
    @given(st.integers(2, 5), st.data())
    def test_random_weighted(self, n, data):
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        edges = data.draw(st.lists(st.sampled_from(pairs), unique=True))
        w = data.draw(st.lists(st.integers(1, 4), min_size=n, max_size=n))
        p = SourceProblem(n, tuple(edges), tuple(w))
        res = encode(p)
        v = verify(res)
        assert v.ok, v.message
        _, maxima = oracle_optimum(p)
        assert set(v.decoded) <= set(maxima)
        assert v.decoded

    def test_unit_disk_validity(self):
        for fam in (TRIANGULAR, KING):
            res = encode(K23, fam)
            assert set(derive_edges(res.layout)) == oracles.distance_edges(res.layout.sites, fam.name)

    def test_king(self):
        res = encode(K4, KING)
        assert verify(res).ok


class TestParity:
    @pytest.mark.parametrize("p", [K2, K4, K23], ids=["K2", "K4", "K23"])
    def test_signs_alternate_along_wires(self, p):
        for fam in (TRIANGULAR, KING):
            cell = encode(p, fam).meta["cell_size"]
            raw = trim(replace_gadgets(build_crossing_lattice(p, fam, cell)))
            for bond in raw.bonds:
                a, b = tuple(bond)
                if raw.owner.get(a) is not None and raw.owner.get(a) == raw.owner.get(b):
                    assert raw.sign[a] == -raw.sign[b]

    def test_readouts_are_odd_sites(self):
        res = encode(K23)
        for v, sites in res.pin_map.items():
            assert res.readout[v] in sites


class TestVerify:
    def test_corrupted_ancilla(self):
        res = encode(K23)
        ancilla = next(i for i in range(len(res.layout)) if i not in res.readout.values())
        ws = list(res.layout.weights)
        ws[ancilla] += 1
        bad = EncodingResult.from_dict({**res.to_dict(), "layout": {**res.layout.to_dict(), "sites": [
            {"x": x, "y": y, "weight": w} for (x, y), w in zip(res.layout.sites, ws)]}})
        v = verify(bad)
        assert not v.ok and "off the scale" in v.message

    def test_json_round_trip(self):
        res = encode(K23)
        v = verify(res)
        back = EncodingResult.from_dict(res.to_dict())
        assert back.layout == res.layout and back.energy_offset == v.energy_offset
        assert verify(back).ok

    def test_svg(self):
        svg = encode(K2).to_svg()
        assert svg.startswith("<svg") and "red" in svg


def test_problem_validation():
    with pytest.raises(ValueError):
        SourceProblem(2, ((0, 0),))
    with pytest.raises(ValueError):
        SourceProblem(2, ((0, 1),), (1, 0))
    assert SourceProblem.from_dict({"edges": [[0, 2]]}).n == 3


def test_tiny_cell_raises():
    with pytest.raises(GeometryError):
        encode(K4, cell_size=2)
