from collections import Counter
from datetime import date

import numpy as np
import pytest

from flagcrash.corrnet import WeightedDigraph
from flagcrash.errors import DataError
from flagcrash.ph import (
    PersistenceDiagram,
    build_filtration,
    diagram_norm,
    persistent_homology,
    tda_features,
)

from oracles import (
    brute_force_diagram,
    random_digraph,
    union_find_merge_weights,
)


def graph(n, edges):
    return WeightedDigraph(
        n_vertices=n,
        edges=[(s, t, float(w)) for s, t, w in edges],
        as_of_date=date(2020, 1, 6),
    )


def reduction_multisets(g):
    d = persistent_homology(build_filtration(g))
    return Counter(d.finite), Counter(d.essential)


class TestBuildFiltration:
    def test_transitive_triangle_has_one_2_simplex(self):
        f = build_filtration(graph(3, [(0, 1, 0.1), (0, 2, 0.2), (1, 2, 0.3)]))
        tris = [s for s in f.simplices if s[1] == 2]
        assert tris == [((0, 1, 2), 2, 0.3)]

    def test_directed_3_cycle_has_no_2_simplex(self):
        f = build_filtration(graph(3, [(0, 1, 0.5), (1, 2, 0.5), (2, 0, 0.5)]))
        assert all(s[1] != 2 for s in f.simplices)

    def test_empty_edge_set_vertices_only(self):
        f = build_filtration(graph(4, []))
        assert f.simplices == [((v,), 0, 0.0) for v in range(4)]

    def test_sorted_and_faces_precede(self):
        rng = np.random.default_rng(3)
        g = random_digraph(rng, 8)
        f = build_filtration(g)
        keys = [(v, d, t) for t, d, v in f.simplices]
        assert keys == sorted(keys)
        position = {s[0]: i for i, s in enumerate(f.simplices)}
        for tup, dim, _ in f.simplices:
            for drop in range(dim + 1):
                face = tup[:drop] + tup[drop + 1 :]
                if face:
                    assert position[face] < position[tup]

    def test_vertices_at_zero(self):
        f = build_filtration(graph(2, [(0, 1, 0.4)]))
        assert f.simplices[0] == ((0,), 0, 0.0)
        assert f.simplices[1] == ((1,), 0, 0.0)

    def test_rejects_self_loop_and_duplicate(self):
        with pytest.raises(DataError, match="self-loop"):
            build_filtration(graph(2, [(0, 0, 0.5)]))
        with pytest.raises(DataError, match="duplicate"):
            build_filtration(graph(2, [(0, 1, 0.5), (0, 1, 0.6)]))


class TestHandComputedDiagrams:
    def test_two_vertices_one_edge(self):
        finite, essential = reduction_multisets(graph(2, [(0, 1, 0.3)]))
        assert finite == Counter({(0.0, 0.3, 0): 1})
        assert essential == Counter({(0.0, 0): 1})

    def test_directed_3_cycle(self):
        finite, essential = reduction_multisets(
            graph(3, [(0, 1, 0.5), (1, 2, 0.5), (2, 0, 0.5)])
        )
        assert finite == Counter({(0.0, 0.5, 0): 2})
        assert essential == Counter({(0.0, 0): 1, (0.5, 1): 1})

    def test_transitive_triangle_zero_length_h1_discarded(self):
        finite, essential = reduction_multisets(
            graph(3, [(0, 1, 0.1), (0, 2, 0.2), (1, 2, 0.3)])
        )
        assert finite == Counter({(0.0, 0.1, 0): 1, (0.0, 0.2, 0): 1})
        assert essential == Counter({(0.0, 0): 1})

    def test_reciprocal_edges_make_a_digon_cycle(self):
        # (0,1) and (1,0) are distinct ordered 1-simplices sharing both
        # endpoints; their sum is a 1-cycle that nothing fills.
        finite, essential = reduction_multisets(graph(2, [(0, 1, 0.2), (1, 0, 0.4)]))
        assert finite == Counter({(0.0, 0.2, 0): 1})
        assert essential == Counter({(0.0, 0): 1, (0.4, 1): 1})


class TestAgainstOracles:
    @pytest.mark.parametrize("seed", range(40))
    def test_matches_rank_oracle_on_small_digraphs(self, seed):
        rng = np.random.default_rng(9000 + seed)
        g = random_digraph(rng, 6)
        finite, essential = reduction_multisets(g)
        oracle_finite, oracle_essential = brute_force_diagram(g)
        assert finite == oracle_finite
        assert essential == oracle_essential

    @pytest.mark.parametrize("seed", range(25))
    def test_h0_deaths_match_union_find(self, seed):
        rng = np.random.default_rng(500 + seed)
        g = random_digraph(rng, 30)
        finite, essential = reduction_multisets(g)
        deaths = Counter(d for b, d, dim in finite.elements() if dim == 0)
        merge_weights, components = union_find_merge_weights(g)
        assert deaths == merge_weights
        assert sum(c for (b, dim), c in essential.items() if dim == 0) == components

    def test_h0_bar_count_equals_vertex_count(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            g = random_digraph(rng, 12)
            d = persistent_homology(build_filtration(g))
            n_h0 = sum(1 for *_, dim in d.finite if dim == 0) + sum(
                1 for _, dim in d.essential if dim == 0
            )
            assert n_h0 == g.n_vertices

    def test_isolated_vertex_only_adds_essential_h0(self):
        g = graph(3, [(0, 1, 0.4)])
        g_plus = graph(4, [(0, 1, 0.4)])
        d = persistent_homology(build_filtration(g))
        d_plus = persistent_homology(build_filtration(g_plus))
        assert Counter(d.finite) == Counter(d_plus.finite)
        assert Counter(d_plus.essential) - Counter(d.essential) == Counter({(0.0, 0): 1})

    @pytest.mark.parametrize("seed", range(10))
    def test_rescaling_rescales_every_bar(self, seed):
        rng = np.random.default_rng(200 + seed)
        g = random_digraph(rng, 10)
        lam = float(rng.uniform(0.1, 5.0))
        scaled = WeightedDigraph(
            n_vertices=g.n_vertices,
            edges=[(s, t, lam * w) for s, t, w in g.edges],
            as_of_date=g.as_of_date,
        )
        d = persistent_homology(build_filtration(g))
        d_scaled = persistent_homology(build_filtration(scaled))
        got = sorted(d_scaled.finite)
        want = sorted((lam * b, lam * dth, dim) for b, dth, dim in d.finite)
        assert len(got) == len(want)
        for (gb, gd, gdim), (wb, wd, wdim) in zip(got, want):
            assert gdim == wdim
            assert gb == pytest.approx(wb, rel=1e-12, abs=1e-15)
            assert gd == pytest.approx(wd, rel=1e-12, abs=1e-15)


class TestNorms:
    def diagram(self, finite, essential=(), max_f=1.0):
        return PersistenceDiagram(
            finite=list(finite), essential=list(essential), max_filtration=max_f
        )

    def test_single_bar(self):
        d = self.diagram([(0.0, 0.3, 0)])
        assert diagram_norm(d, 1, 0) == pytest.approx(0.3)
        assert diagram_norm(d, 2, 0) == pytest.approx(0.3)

    def test_two_bars(self):
        d = self.diagram([(0.0, 0.3, 0), (0.0, 0.4, 0)])
        assert diagram_norm(d, 1, 0) == pytest.approx(0.7)
        assert diagram_norm(d, 2, 0) == pytest.approx(0.5)

    def test_empty_diagram_zero(self):
        d = self.diagram([])
        assert diagram_norm(d, 1, 0) == 0.0
        assert diagram_norm(d, 2, 1) == 0.0

    def test_essential_dropped_by_default_capped_on_request(self):
        d = self.diagram([(0.0, 0.3, 1)], essential=[(0.2, 1)], max_f=0.9)
        assert diagram_norm(d, 1, 1) == pytest.approx(0.3)
        assert diagram_norm(d, 1, 1, essential="cap") == pytest.approx(0.3 + 0.7)

    def test_l1_dominates_l2_on_random_diagrams(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            g = random_digraph(rng, 8)
            d = persistent_homology(build_filtration(g))
            for dim in (0, 1):
                assert diagram_norm(d, 1, dim) >= diagram_norm(d, 2, dim) - 1e-15

    def test_bad_arguments(self):
        d = self.diagram([])
        with pytest.raises(DataError):
            diagram_norm(d, 3, 0)
        with pytest.raises(DataError):
            diagram_norm(d, 1, 2)


class TestTdaFeatures:
    def test_empty_sequence(self):
        assert tda_features([]) == []

    def test_edgeless_graph_all_zero(self):
        feats = tda_features([graph(5, [])])
        assert feats[0].values() == (0.0, 0.0, 0.0, 0.0)

    def test_two_vertex_edge_feature(self):
        feats = tda_features([graph(2, [(0, 1, 0.3)])])
        assert feats[0].values() == pytest.approx((0.3, 0.3, 0.0, 0.0))
        assert feats[0].as_of_date == date(2020, 1, 6)
