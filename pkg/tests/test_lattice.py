import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tlsg.lattice import (
    KING,
    TRIANGULAR,
    GridLayout,
    LatticeFamily,
    LatticeKind,
    derive_edges,
    family_from_name,
    layout_to_svg,
    normalize_sites,
    quality_metrics,
    stencil_edges,
    to_physical,
)


def layout(family, sites, weights=None):
    return GridLayout(family, tuple(sites), tuple(weights or [1] * len(sites)))


class TestToPhysical:
    def test_origin(self):
        assert to_physical((0, 0), TRIANGULAR, 1.0) == (0.0, 0.0)

    def test_odd_column_shift(self):
        X, Y = to_physical((1, 0), TRIANGULAR, 1.0)
        assert X == pytest.approx(math.sqrt(3) / 2)
        assert Y == pytest.approx(0.5)

    def test_spacing_two(self):
        X, Y = to_physical((2, 3), TRIANGULAR, 2.0)
        assert X == pytest.approx(2 * math.sqrt(3))
        assert Y == pytest.approx(6.0)

    def test_king_is_square_grid(self):
        assert to_physical((3, 5), KING, 1.5) == (4.5, 7.5)

    def test_rejects_nonpositive_spacing(self):
        with pytest.raises(ValueError):
            to_physical((0, 0), TRIANGULAR, 0.0)

    @given(st.integers(0, 40), st.integers(0, 40), st.floats(0.1, 10))
    def test_matches_oracle(self, x, y, a):
        for fam in (TRIANGULAR, KING):
            got = to_physical((x, y), fam, a)
            want = oracles.phys((x, y), fam.name, a)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


class TestDeriveEdges:
    def test_pair(self):
        assert derive_edges(layout(TRIANGULAR, [(0, 0), (1, 0)])) == [(0, 1)]

    def test_triangle(self):
        assert len(derive_edges(layout(TRIANGULAR, [(0, 0), (0, 1), (1, 0)]))) == 3

    def test_king_distance_two_is_not_an_edge(self):
        got = derive_edges(layout(KING, [(0, 0), (1, 1), (0, 2)]))
        assert got == [(0, 1), (1, 2)]

    def test_six_neighbors(self):
        center = (2, 2)
        sites = [center] + TRIANGULAR.neighbors(center)
        edges = derive_edges(layout(TRIANGULAR, sites))
        assert sum(1 for e in edges if 0 in e) == 6

    @given(st.sets(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=60))
    def test_stencil_round_trip(self, sites):
        for fam in (TRIANGULAR, KING):
            lay = layout(fam, sorted(sites))
            assert derive_edges(lay) == stencil_edges(lay)
            assert set(derive_edges(lay)) == oracles.distance_edges(lay.sites, fam.name)

    @given(st.sets(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=2, max_size=40))
    def test_edge_and_gap_lengths(self, sites):
        lay = layout(TRIANGULAR, sorted(sites))
        pts = lay.physical(1.0)
        edges = set(derive_edges(lay))
        for i in range(len(lay)):
            for j in range(i + 1, len(lay)):
                d = math.dist(pts[i], pts[j])
                if (i, j) in edges:
                    assert d == pytest.approx(1.0, abs=1e-6)
                else:
                    assert d >= math.sqrt(3) - 1e-6


class TestQuality:
    def test_triangular(self):
        q, q6 = quality_metrics(TRIANGULAR)
        assert abs(q - math.sqrt(3)) < 1e-12
        assert abs(q6 - 27) < 1e-12

    def test_king(self):
        q, q6 = quality_metrics(KING)
        assert abs(q - math.sqrt(2)) < 1e-12
        assert abs(q6 - 8) < 1e-12

    def test_degenerate_family(self):
        assert quality_metrics(LatticeFamily(LatticeKind.KING, 1.0, 1.0)) == (1.0, 1.0)

    def test_monotone(self):
        assert quality_metrics(TRIANGULAR)[0] > quality_metrics(KING)[0] > 1


class TestGridLayout:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            layout(TRIANGULAR, [(0, 0), (0, 0)])

    def test_rejects_zero_weight(self):
        with pytest.raises(ValueError):
            layout(TRIANGULAR, [(0, 0)], [0])

    def test_rejects_negative_coordinates(self):
        with pytest.raises(ValueError):
            layout(KING, [(-1, 0)])

    def test_json_round_trip(self):
        lay = GridLayout(TRIANGULAR, ((0, 0), (1, 0), (3, 2)), (1, 2, 4), unit=3.5)
        back = GridLayout.from_json(lay.to_json())
        assert back == lay
        assert set(lay.to_dict()) == {"family", "unit", "sites"}
        assert lay.to_dict()["sites"][2] == {"x": 3, "y": 2, "weight": 4}

    def test_family_names(self):
        assert family_from_name("TLSG") is TRIANGULAR
        assert family_from_name("king") is KING
        with pytest.raises(ValueError):
            family_from_name("honeycomb")

    def test_normalize_keeps_column_parity(self):
        sites = [(3, -2), (4, 5)]
        dx, dy = normalize_sites(sites, TRIANGULAR)
        assert dx % 2 == 0
        assert min(x + dx for x, _ in sites) >= 0 and min(y + dy for _, y in sites) >= 0

    def test_svg_marks_highlight(self):
        svg = layout_to_svg(layout(TRIANGULAR, [(0, 0), (1, 0)], [1, 2]), highlight=[1])
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert svg.count("<circle") == 2
        assert svg.count('stroke="red"') == 1
