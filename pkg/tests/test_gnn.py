from datetime import date

import numpy as np
import pytest

from flagcrash import autodiff as ad
from flagcrash.corrnet import WeightedDigraph
from flagcrash.errors import DataError
from flagcrash.gnn import (
    AttributedGraph,
    GlocalConfig,
    OcginConfig,
    attribute_graphs,
    gine_forward,
    glocalkd_score,
    glocalkd_scores,
    glocalkd_train,
    init_gine,
    ocgin_scores,
    ocgin_train,
)

from oracles import random_graph_sequence


def digraph(n, edges):
    return WeightedDigraph(
        n_vertices=n,
        edges=[(s, t, float(w)) for s, t, w in edges],
        as_of_date=date(2020, 1, 2),
    )


def numpy_gine_forward(model, g):
    """Loop-based reference forward, independent of the tape machinery."""
    h = g.x.copy()
    outs = []
    for layer in model.layers:
        agg = np.zeros_like(h)
        proj = layer.edge_proj.data
        for (s, t), yv in zip(g.edges, g.y):
            agg[t] += np.maximum(h[s] + yv @ proj, 0.0)
            agg[s] += np.maximum(h[t] + yv @ proj, 0.0)
        pre = (1.0 + float(layer.epsilon.data)) * h + agg
        h = np.maximum(pre @ layer.w1.data, 0.0) @ layer.w2.data
        outs.append(h)
    emb = np.concatenate([o.mean(axis=0) for o in outs])
    return outs, emb


def grad_or_zeros(p):
    return p.grad.copy() if p.grad is not None else np.zeros_like(p.data)


def finite_difference(loss_fn, params, h=1e-5):
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat, gflat = p.data.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = max(np.max(np.abs(a)), np.max(np.abs(n)), 1.0)
        worst = max(worst, np.max(np.abs(a - n)) / denom)
    return worst


class TestAttributeGraphs:
    def test_edgeless(self):
        (g,) = attribute_graphs([digraph(3, [])])
        np.testing.assert_array_equal(g.x, [[1.0, 0.0]] * 3)
        assert g.edges == [] and g.y.shape == (0, 1)

    def test_single_edge(self):
        (g,) = attribute_graphs([digraph(2, [(0, 1, 0.5)])])
        np.testing.assert_array_equal(g.x, [[1.0, 0.5], [1.0, 0.5]])
        np.testing.assert_array_equal(g.y, [[0.5]])

    def test_star_weighted_degrees(self):
        (g,) = attribute_graphs(
            [digraph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])]
        )
        np.testing.assert_array_equal(g.x[0], [1.0, 3.0])
        for leaf in (1, 2, 3):
            np.testing.assert_array_equal(g.x[leaf], [1.0, 1.0])


class TestGineForward:
    def test_no_edges_zero_eps_is_pure_mlp(self):
        rng = np.random.default_rng(1)
        model = init_gine(rng, hidden=6, n_layers=2)
        (g,) = attribute_graphs([digraph(4, [])])
        per_layer, _ = gine_forward(model, g)
        h = g.x
        for layer, out in zip(model.layers, per_layer):
            h = np.maximum(h @ layer.w1.data, 0.0) @ layer.w2.data
            np.testing.assert_allclose(out.data, h, atol=1e-14)

    def test_vertex_transitive_graph_equal_embeddings(self):
        rng = np.random.default_rng(2)
        model = init_gine(rng, hidden=5, n_layers=3)
        ring = digraph(5, [(i, (i + 1) % 5, 0.7) for i in range(5)])
        (g,) = attribute_graphs([ring])
        per_layer, _ = gine_forward(model, g)
        for out in per_layer:
            spread = np.max(np.abs(out.data - out.data[0]), axis=0)
            assert np.max(spread) < 1e-12

    @pytest.mark.parametrize("seed", range(8))
    def test_isomorphic_relabeling_preserves_graph_embedding(self, seed):
        rng = np.random.default_rng(700 + seed)
        g_raw = random_graph_sequence(seed, 1, 9)[0]
        model = init_gine(rng, hidden=7, n_layers=2)
        perm = rng.permutation(g_raw.n_vertices)
        relabeled = WeightedDigraph(
            n_vertices=g_raw.n_vertices,
            edges=[(int(perm[s]), int(perm[t]), w) for s, t, w in g_raw.edges],
            as_of_date=g_raw.as_of_date,
        )
        a, b = attribute_graphs([g_raw, relabeled])
        per_a, emb_a = gine_forward(model, a)
        per_b, emb_b = gine_forward(model, b)
        np.testing.assert_allclose(emb_a.data, emb_b.data, atol=1e-12)
        # node embeddings permute along with the vertices: vertex v maps to perm[v]
        np.testing.assert_allclose(per_a[-1].data, per_b[-1].data[perm], atol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_numpy_reference(self, seed):
        rng = np.random.default_rng(50 + seed)
        model = init_gine(rng, hidden=6, n_layers=3)
        (g,) = attribute_graphs(random_graph_sequence(seed + 20, 1, 10))
        per_layer, emb = gine_forward(model, g)
        ref_layers, ref_emb = numpy_gine_forward(model, g)
        np.testing.assert_allclose(emb.data, ref_emb, atol=1e-12)
        for mine, ref in zip(per_layer, ref_layers):
            np.testing.assert_allclose(mine.data, ref, atol=1e-12)

    def test_shape_mismatch_errors(self):
        rng = np.random.default_rng(3)
        model = init_gine(rng)
        bad = AttributedGraph(
            n=2, x=np.ones((2, 3)), edges=[], y=np.zeros((0, 1)), as_of_date=None
        )
        with pytest.raises(DataError):
            gine_forward(model, bad)


class TestGradients:
    @pytest.mark.parametrize("seed", range(5))
    def test_gine_layer_gradient_matches_fd(self, seed):
        rng = np.random.default_rng(900 + seed)
        model = init_gine(rng, hidden=4, n_layers=2)
        (g,) = attribute_graphs(random_graph_sequence(seed + 40, 1, 6))
        params = model.parameters()

        def loss_value():
            _, emb = gine_forward(model, g)
            return float(ad.squared_norm(emb).data)

        for p in params:
            p.zero_grad()
        ad.squared_norm(gine_forward(model, g)[1]).backward()
        analytic = [grad_or_zeros(p) for p in params]
        numeric = finite_difference(loss_value, params)
        assert max_rel_error(analytic, numeric) < 1e-4

    @pytest.mark.parametrize("seed", range(3))
    def test_ocgin_loss_gradient_matches_fd(self, seed):
        rng = np.random.default_rng(950 + seed)
        model = init_gine(rng, hidden=4, n_layers=2)
        graphs = attribute_graphs(random_graph_sequence(seed + 60, 3, 6))
        center = ad.Tensor(rng.normal(size=model.embedding_dim) * 0.3)
        params = model.parameters()

        def loss_tensor():
            terms = [
                ad.squared_norm(ad.sub(gine_forward(model, g)[1], center))
                for g in graphs
            ]
            total = terms[0]
            for t in terms[1:]:
                total = ad.add(total, t)
            return ad.scalar_mul(1.0 / len(graphs), total)

        for p in params:
            p.zero_grad()
        loss_tensor().backward()
        analytic = [grad_or_zeros(p) for p in params]
        numeric = finite_difference(lambda: float(loss_tensor().data), params)
        assert max_rel_error(analytic, numeric) < 1e-4


class TestOcgin:
    def small_config(self, **kw):
        base = dict(
            lr=0.003,
            weight_decay=0.0,
            batch_size=16,
            layers=2,
            hidden=5,
            epochs=60,
            seed=7,
        )
        base.update(kw)
        return OcginConfig(**base)

    def test_identical_graphs_loss_tiny(self):
        # the center is the shared embedding itself, so the loss can sit at
        # (numerically) zero from the first epoch
        graphs = attribute_graphs(
            [digraph(4, [(0, 1, 0.5), (1, 2, 0.5), (0, 3, 0.2)])] * 10
        )
        state = ocgin_train(graphs, self.small_config(epochs=200))
        assert min(state.loss_curve) < 1e-6
        assert state.loss_curve[-1] < 1e-3

    def test_zeroing_every_output_map_gives_center_norm_loss(self):
        graphs = attribute_graphs(random_graph_sequence(5, 8, 6))
        state = ocgin_train(graphs, self.small_config(epochs=1))
        for layer in state.model.layers:
            layer.w2.data[:] = 0.0
        scores = ocgin_scores(state, graphs)
        expected = float(state.center @ state.center)
        np.testing.assert_allclose(scores, expected, atol=1e-12)

    def test_two_seeds_differ_but_both_descend(self):
        graphs = attribute_graphs(random_graph_sequence(8, 24, 8))
        state_a = ocgin_train(graphs, self.small_config(seed=1, epochs=40))
        state_b = ocgin_train(graphs, self.small_config(seed=2, epochs=40))
        assert state_a.model.checksum() != state_b.model.checksum()
        for curve in (state_a.loss_curve, state_b.loss_curve):
            smoothed = np.convolve(curve, np.ones(8) / 8, mode="valid")
            assert smoothed[-1] < smoothed[0]
            upticks = np.diff(smoothed) > 1e-7 * (1 + smoothed[0])
            assert upticks.mean() < 0.2

    def test_scores_nonnegative_and_outlier_on_top(self):
        rng = np.random.default_rng(4)
        ring_graphs = []
        for _ in range(30):
            w = 0.5 + 0.01 * rng.standard_normal()
            ring_graphs.append(
                digraph(6, [(i, (i + 1) % 6, min(max(w, 0.1), 1.0)) for i in range(6)])
            )
        outlier = digraph(
            6, [(i, j, 1.0) for i in range(6) for j in range(6) if i != j]
        )
        graphs = attribute_graphs(ring_graphs + [outlier])
        state = ocgin_train(graphs, self.small_config(weight_decay=1e-4, epochs=40))
        scores = ocgin_scores(state, graphs)
        assert (scores >= 0.0).all()
        assert np.argmax(scores) == len(graphs) - 1

    def test_fixed_seed_bit_identical(self):
        graphs = attribute_graphs(random_graph_sequence(9, 12, 6))
        cfg = self.small_config(weight_decay=1e-5, epochs=15)
        a = ocgin_train(graphs, cfg)
        b = ocgin_train(graphs, cfg)
        assert np.array_equal(a.center, b.center)
        for pa, pb in zip(a.model.parameters(), b.model.parameters()):
            assert np.array_equal(pa.data, pb.data)

    def test_empty_graph_list_rejected(self):
        with pytest.raises(DataError):
            ocgin_train([], self.small_config())


class TestGlocal:
    def small_config(self, **kw):
        base = dict(
            lr=0.003, batch_size=16, layers=2, hidden=5, lam=0.1, epochs=40, seed=11
        )
        base.update(kw)
        return GlocalConfig(**base)

    def test_student_equal_teacher_zero_loss_zero_grads(self):
        graphs = attribute_graphs(random_graph_sequence(3, 6, 6))
        state = glocalkd_train(graphs, self.small_config(epochs=1))
        state.student = state.teacher.copy()
        for g in graphs:
            assert glocalkd_score(state, g) == pytest.approx(0.0, abs=1e-20)

    def test_lambda_zero_score_is_graph_term_alone(self):
        graphs = attribute_graphs(random_graph_sequence(6, 5, 6))
        state = glocalkd_train(graphs, self.small_config(lam=0.0, epochs=3))
        for g in graphs:
            _, t_emb = numpy_gine_forward(state.teacher, g)
            _, s_emb = numpy_gine_forward(state.student, g)
            expected = float(np.sum((s_emb - t_emb) ** 2))
            assert glocalkd_score(state, g) == pytest.approx(expected, rel=1e-12)

    def test_training_reduces_mean_loss(self):
        graphs = attribute_graphs(random_graph_sequence(12, 50, 8))
        state = glocalkd_train(graphs, self.small_config(epochs=30))
        assert state.loss_curve[-1] < state.loss_curve[0]

    def test_teacher_frozen_through_training(self):
        graphs = attribute_graphs(random_graph_sequence(13, 10, 6))
        cfg = self.small_config(epochs=2)
        rng = np.random.default_rng(cfg.seed)
        reference = init_gine(rng, hidden=cfg.hidden, n_layers=cfg.layers)
        state = glocalkd_train(graphs, cfg)
        assert state.teacher.checksum() == reference.checksum()
        for pt, pr in zip(state.teacher.parameters(), reference.parameters()):
            assert np.array_equal(pt.data, pr.data)

    def test_scores_nonnegative_and_planted_outlier_top3(self):
        rng = np.random.default_rng(14)
        base = []
        for _ in range(30):
            w = float(np.clip(0.6 + 0.01 * rng.standard_normal(), 0.1, 1.0))
            base.append(digraph(6, [(i, (i + 1) % 6, w) for i in range(6)]))
        outlier = digraph(
            6, [(i, j, 1.0) for i in range(6) for j in range(6) if i != j]
        )
        graphs = attribute_graphs(base + [outlier])
        state = glocalkd_train(graphs, self.small_config(epochs=40))
        scores = glocalkd_scores(state, graphs)
        assert (scores >= 0.0).all()
        assert len(graphs) - 1 in np.argsort(scores)[-3:]

    def test_glocal_gradient_matches_fd(self):
        rng = np.random.default_rng(15)
        graphs = attribute_graphs(random_graph_sequence(16, 2, 5))
        cfg = self.small_config(epochs=1)
        teacher = init_gine(rng, hidden=4, n_layers=2)
        student = init_gine(rng, hidden=4, n_layers=2)
        lam = 0.5
        params = student.parameters()

        def loss_value():
            total = 0.0
            for g in graphs:
                t_layers, t_emb = numpy_gine_forward(teacher, g)
                s_layers, s_emb = gine_forward(student, g)
                node = np.sum((s_layers[-1].data - t_layers[-1]) ** 2) / g.n
                graph = np.sum((s_emb.data - t_emb) ** 2)
                total += lam * node + graph
            return total / len(graphs)

        def loss_tensor():
            terms = []
            for g in graphs:
                t_layers, t_emb = numpy_gine_forward(teacher, g)
                s_layers, s_emb = gine_forward(student, g)
                node = ad.scalar_mul(
                    lam / g.n, ad.squared_norm(ad.sub(s_layers[-1], ad.Tensor(t_layers[-1])))
                )
                graph = ad.squared_norm(ad.sub(s_emb, ad.Tensor(t_emb)))
                terms.append(ad.add(node, graph))
            total = terms[0]
            for t in terms[1:]:
                total = ad.add(total, t)
            return ad.scalar_mul(1.0 / len(graphs), total)

        for p in params:
            p.zero_grad()
        loss_tensor().backward()
        analytic = [grad_or_zeros(p) for p in params]
        numeric = finite_difference(loss_value, params)
        assert max_rel_error(analytic, numeric) < 1e-4

    def test_empty_list_rejected(self):
        with pytest.raises(DataError):
            glocalkd_train([], self.small_config())
