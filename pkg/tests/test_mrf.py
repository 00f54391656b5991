"""Intersection graph construction and energy evaluation."""

import math

import numpy as np
import pytest

from streetfuse.geometry import LocalChart, haversine_distance
from streetfuse.mrf import (
    DEGENERATE_HEIGHT_PENALTY,
    GraphNode,
    MrfWeights,
    build_graph,
    energy,
    node_distances,
    u0_value,
    u1_value,
    u2_value,
)

from conftest import ANCHOR, ray_through


def planar_intersection(o1, d1, o2, d2):
    """Analytic oracle: intersection of two planar parameterized lines."""
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    dx, dy = o2[0] - o1[0], o2[1] - o1[1]
    t1 = (dx * d2[1] - dy * d2[0]) / cross
    return (o1[0] + t1 * d1[0], o1[1] + t1 * d1[1])


class TestWeights:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            MrfWeights(alpha=1.0)
        with pytest.raises(ValueError):
            MrfWeights(alpha=-0.1)

    def test_rejects_oversubscribed_sum(self):
        with pytest.raises(ValueError):
            MrfWeights(0.5, 0.4, 0.2)

    def test_pairwise_complement(self):
        assert MrfWeights(0.2, 0.3, 0.1).pairwise == pytest.approx(0.4)
        assert MrfWeights(0.5, 0.4, 0.1).pairwise == pytest.approx(0.0)


class TestBuildGraph:
    def test_two_crossing_rays_make_one_node(self, chart):
        r1 = ray_through(chart, 0.0, 0.0, 10.0, 10.0, "a")
        r2 = ray_through(chart, 20.0, 0.0, 10.0, 10.0, "b")
        g = build_graph([r1, r2], 30.0)
        assert len(g.nodes) == 1
        assert [len(ids) for ids in g.ray_nodes] == [1, 1]
        node = g.nodes[0]
        assert haversine_distance(node.position, chart.to_geo(10.0, 10.0)) < 1e-3
        assert node.tri_dist[0] == pytest.approx(math.hypot(10, 10), rel=1e-6)

    def test_three_mutually_crossing_rays(self, chart):
        # Three rays from distinct frames crossing pairwise; the expected
        # node positions come from an independent planar oracle.
        origins = [(-10.0, 0.0), (10.0, 0.0), (0.0, 18.0)]
        targets = [(10.0, 12.0), (-10.0, 12.0), (0.5, -10.0)]
        rays = [
            ray_through(chart, o[0], o[1], t[0], t[1], f"img{k}")
            for k, (o, t) in enumerate(zip(origins, targets))
        ]
        g = build_graph(rays, 60.0)
        assert len(g.nodes) == 3
        assert all(len(ids) == 2 for ids in g.ray_nodes)
        dirs = []
        for o, t in zip(origins, targets):
            n = math.hypot(t[0] - o[0], t[1] - o[1])
            dirs.append(((t[0] - o[0]) / n, (t[1] - o[1]) / n))
        expected = {
            (0, 1): planar_intersection(origins[0], dirs[0], origins[1], dirs[1]),
            (0, 2): planar_intersection(origins[0], dirs[0], origins[2], dirs[2]),
            (1, 2): planar_intersection(origins[1], dirs[1], origins[2], dirs[2]),
        }
        for node in g.nodes:
            ex, ey = expected[(node.ray_index_a, node.ray_index_b)]
            assert haversine_distance(node.position, chart.to_geo(ex, ey)) < 1e-3

    def test_cutoff_excludes_distant_intersections(self, chart):
        # Rays meet 45 m from both origins (3-4-5 triangle scaled by 9);
        # the 30 m cutoff drops the node.
        apex = (0.0, 36.0)
        r1 = ray_through(chart, -27.0, 0.0, *apex, image_id="a")
        r2 = ray_through(chart, 27.0, 0.0, *apex, image_id="b")
        d = haversine_distance(r1.origin, chart.to_geo(*apex))
        assert d == pytest.approx(45.0, abs=0.01)
        assert len(build_graph([r1, r2], 30.0).nodes) == 0
        assert len(build_graph([r1, r2], 50.0).nodes) == 1

    def test_same_frame_rays_never_intersect(self, chart):
        r1 = ray_through(chart, 0.0, 0.0, 10.0, 10.0, "same")
        r2 = ray_through(chart, 0.0, 0.0, -10.0, 10.0, "same", heading=315.0)
        assert len(build_graph([r1, r2], 30.0).nodes) == 0

    def test_empty_input_is_valid(self):
        g = build_graph([], 30.0)
        assert g.nodes == [] and g.rays == []

    def test_mixed_classes_rejected(self, chart):
        r1 = ray_through(chart, 0.0, 0.0, 10.0, 10.0, "a", class_label="drain")
        r2 = ray_through(chart, 20.0, 0.0, 10.0, 10.0, "b", class_label="sign")
        with pytest.raises(ValueError):
            build_graph([r1, r2], 30.0)

    def test_ray_order_irrelevant_up_to_reindexing(self, chart):
        rng = np.random.default_rng(9)
        rays = []
        for k in range(8):
            o = rng.uniform(-25, 25, size=2)
            t = rng.uniform(-15, 15, size=2)
            rays.append(ray_through(chart, o[0], o[1], t[0], t[1], f"img{k}"))

        def canonical(graph):
            return sorted(
                (node.frame_pair(), round(node.position.lat, 12), round(node.position.lon, 12))
                for node in graph.nodes
            )

        base = canonical(build_graph(rays, 30.0))
        perm = [rays[i] for i in rng.permutation(len(rays))]
        assert canonical(build_graph(perm, 30.0)) == base

    def test_node_lists_sorted_by_distance_along_ray(self, chart):
        shared = ray_through(chart, 0.0, -10.0, 0.0, 30.0, "shared")
        crossers = [
            ray_through(chart, -10.0, y, 10.0, y, f"c{y}") for y in (12.0, 4.0, 8.0)
        ]
        g = build_graph([shared] + crossers, 40.0)
        along = [g.nodes[i].tri_dist[0] for i in g.ray_nodes[0]]
        assert along == sorted(along)


def _single_node_graph(chart, mono=(None, None)):
    r1 = ray_through(chart, 0.0, 0.0, 10.0, 10.0, "a", mono_depth=mono[0])
    r2 = ray_through(chart, 20.0, 0.0, 10.0, 10.0, "b", mono_depth=mono[1])
    return build_graph([r1, r2], 30.0)


class TestUnaryTerms:
    def test_u0_sum_over_two_singleton_rays(self, chart):
        g = _single_node_graph(chart)
        assert u0_value(g, g.nodes[0], "sum") == pytest.approx(-2.0)
        assert u0_value(g, g.nodes[0], "mean") == pytest.approx(-1.0)
        assert u0_value(g, g.nodes[0], "min") == pytest.approx(-1.0)

    def test_u1_absolute_mismatch(self):
        node = GraphNode(0, ANCHOR, None, None, 0, 1, (10.0, 10.0), (12.0, 9.0))
        assert u1_value(node) == pytest.approx(3.0)

    def test_u1_perfect_agreement(self):
        node = GraphNode(0, ANCHOR, None, None, 0, 1, (10.0, 10.0), (10.0, 10.0))
        assert u1_value(node) == 0.0

    def test_u1_missing_depth_contributes_nothing(self):
        node = GraphNode(0, ANCHOR, None, None, 0, 1, (10.0, 10.0), (None, 10.0))
        assert u1_value(node) == 0.0

    def test_u2_height_disagreement_and_degenerate_penalty(self):
        node = GraphNode(0, ANCHOR, None, None, 0, 1, (10.0, 10.0), (None, None))
        assert u2_value(node) == 0.0  # heights not yet filled
        node.heights = (1.5, 2.0)
        assert u2_value(node) == pytest.approx(0.5)
        node.height_degenerate = True
        assert u2_value(node) == DEGENERATE_HEIGHT_PENALTY

    def test_node_distances_table(self, chart):
        g = _single_node_graph(chart, mono=(12.0, 9.0))
        ((tri, mono),) = node_distances(g)
        assert mono == (12.0, 9.0)
        assert tri[0] == pytest.approx(math.hypot(10, 10), rel=1e-6)


def _three_ray_ladder(chart):
    """One shared ray crossed by two parallel rays 5 m apart."""
    shared = ray_through(chart, 0.0, -10.0, 0.0, 30.0, "r")
    a = ray_through(chart, -10.0, 0.0, 10.0, 0.0, "a")
    b = ray_through(chart, -10.0, 5.0, 10.0, 5.0, "b")
    return build_graph([shared, a, b], 40.0)


class TestEnergy:
    def test_all_zero_labeling_has_zero_energy(self, chart):
        g = _three_ray_ladder(chart)
        assert energy(g, [0] * len(g.nodes), MrfWeights(0.3, 0.2, 0.1)) == 0.0

    def test_single_active_node_with_clean_evidence(self, chart):
        g = _single_node_graph(chart)
        node = g.nodes[0]
        d = node.tri_dist
        node.mono_dist = (d[0], d[1])
        node.heights = (1.0, 1.0)
        got = energy(g, [1], MrfWeights(alpha=0.25))
        assert got == pytest.approx(0.25 * -2.0)

    def test_pairwise_distance_between_coactive_nodes(self, chart):
        g = _three_ray_ladder(chart)
        assert len(g.nodes) == 2
        got = energy(g, [1, 1], MrfWeights(0.0, 0.0, 0.0))
        assert got == pytest.approx(5.0, rel=1e-9)

    def test_label_length_mismatch_rejected(self, chart):
        g = _three_ray_ladder(chart)
        with pytest.raises(ValueError):
            energy(g, [1], MrfWeights())

    def test_single_flip_decomposition(self, chart):
        rng = np.random.default_rng(21)
        rays = []
        for k in range(7):
            o = rng.uniform(-25, 25, size=2)
            t = rng.uniform(-12, 12, size=2)
            rays.append(
                ray_through(chart, o[0], o[1], t[0], t[1], f"img{k}",
                            mono_depth=float(rng.uniform(1, 30)))
            )
        g = build_graph(rays, 30.0)
        assert g.nodes, "fixture must produce nodes"
        for node in g.nodes:
            node.heights = (float(rng.normal(0, 1)), float(rng.normal(0, 1)))
        w = MrfWeights(0.3, 0.2, 0.1)
        labels = [int(rng.integers(0, 2)) for _ in g.nodes]
        base = energy(g, labels, w)
        for flip in range(len(g.nodes)):
            flipped = list(labels)
            flipped[flip] = 1 - flipped[flip]
            # Expected delta from the flipped node's own terms only.
            node = g.nodes[flip]
            sign = 1.0 if flipped[flip] else -1.0
            delta = sign * (
                w.alpha * u0_value(g, node) + w.beta * u1_value(node) + w.lam * u2_value(node)
            )
            for (m, n), dist in g.shared_ray_pairs().items():
                other = None
                if m == flip:
                    other = n
                elif n == flip:
                    other = m
                if other is not None and flipped[other]:
                    delta += sign * w.pairwise * dist
            assert energy(g, flipped, w) == pytest.approx(base + delta, abs=1e-9)

    def test_zero_alpha_makes_empty_labeling_globally_minimal(self, chart):
        g = _three_ray_ladder(chart)
        rng = np.random.default_rng(3)
        for node in g.nodes:
            node.mono_dist = (float(rng.uniform(5, 25)), float(rng.uniform(5, 25)))
            node.heights = (float(rng.normal(0, 1)), float(rng.normal(0, 1)))
        w = MrfWeights(0.0, 0.3, 0.2)
        for _ in range(32):
            labels = [int(rng.integers(0, 2)) for _ in g.nodes]
            assert energy(g, labels, w) >= 0.0

    def test_positive_alpha_breaks_empty_local_minimum(self, chart):
        # With only the activation term switched on, any single flip from
        # the empty labeling strictly lowers the energy.
        g = _three_ray_ladder(chart)
        w = MrfWeights(alpha=0.2)
        zero = energy(g, [0] * len(g.nodes), w)
        for k in range(len(g.nodes)):
            labels = [0] * len(g.nodes)
            labels[k] = 1
            assert energy(g, labels, w) < zero

    def test_pairwise_coefficients_nonnegative(self, chart):
        g = _three_ray_ladder(chart)
        assert all(d >= 0.0 for d in g.shared_ray_pairs().values())
