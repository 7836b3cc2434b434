"""Coordinate clustering: Lloyd iterations, seeding, ties and degenerate cases."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synth import make_corpus
from typopredict.errors import DataValidationError
from typopredict.geo import CoordinateKMeans, cluster_coordinates, cluster_dataset

RNG = np.random.default_rng(42)
POINTS = RNG.uniform(-60, 60, size=(40, 2))


class TestDegenerateCases:
    def test_k1_center_is_the_mean(self):
        model = CoordinateKMeans(n_clusters=1, seed=0).fit(POINTS)
        np.testing.assert_allclose(model.cluster_centers_[0], POINTS.mean(axis=0))
        expected_inertia = ((POINTS - POINTS.mean(axis=0)) ** 2).sum()
        np.testing.assert_allclose(model.inertia_, expected_inertia)
        assert set(model.labels_) == {0}

    def test_k_equals_n_gives_zero_inertia(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [5.0, 5.0]])
        model = CoordinateKMeans(n_clusters=4, seed=3).fit(pts)
        assert model.inertia_ == 0.0
        assert sorted(model.labels_) == [0, 1, 2, 3]

    def test_k_above_distinct_points_rejected(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(DataValidationError, match="distinct"):
            CoordinateKMeans(n_clusters=3, seed=0).fit(pts)

    def test_duplicate_points_share_a_cluster(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [9.0, 9.0]])
        model = CoordinateKMeans(n_clusters=2, seed=1).fit(pts)
        assert model.labels_[0] == model.labels_[1]
        assert model.inertia_ == 0.0


class TestConvergence:
    def test_inertia_trace_never_increases(self):
        model = CoordinateKMeans(n_clusters=5, seed=7).fit(POINTS)
        trace = np.array(model.inertia_trace_)
        assert (np.diff(trace) <= 1e-9).all()
        assert model.inertia_ == trace[-1]
        assert model.n_iter_ == len(trace)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 1000), k=st.integers(1, 8))
    def test_fixpoint_is_self_consistent(self, seed, k):
        """At convergence every point sits in its nearest centroid's cluster."""
        model = CoordinateKMeans(n_clusters=k, seed=seed).fit(POINTS)
        d2 = ((POINTS[:, None, :] - model.cluster_centers_[None]) ** 2).sum(axis=2)
        np.testing.assert_array_equal(model.labels_, d2.argmin(axis=1))

    def test_deterministic_per_seed(self):
        a = CoordinateKMeans(n_clusters=6, seed=5).fit(POINTS)
        b = CoordinateKMeans(n_clusters=6, seed=5).fit(POINTS)
        np.testing.assert_array_equal(a.labels_, b.labels_)
        np.testing.assert_array_equal(a.cluster_centers_, b.cluster_centers_)
        assert a.inertia_trace_ == b.inertia_trace_


class TestAssignment:
    def test_tie_goes_to_lowest_cluster_id(self):
        pts = np.array([[-1.0, 0.0], [1.0, 0.0]])
        model = CoordinateKMeans(n_clusters=2, seed=0).fit(pts)
        # (0, 0) is exactly halfway between the two centers
        assert model.predict(np.array([[0.0, 0.0]]))[0] == 0

    def test_predict_matches_training_labels(self):
        model = CoordinateKMeans(n_clusters=4, seed=2).fit(POINTS)
        np.testing.assert_array_equal(model.predict(POINTS), model.labels_)


class TestCoordClustering:
    def test_cluster_coordinates_assignment_matches_centroids(self):
        points = [(f"l{i}", float(lat), float(lon)) for i, (lat, lon) in enumerate(POINTS)]
        clustering = cluster_coordinates(points, k=4, seed=9)
        assert clustering.k == 4 and clustering.seed == 9
        for code, lat, lon in points:
            assert clustering.assignment[code] == clustering.assign(lat, lon)

    def test_cluster_dataset_covers_all_records(self):
        corpus = make_corpus(n=25, seed=4)
        clustering = cluster_dataset(corpus, k=3, seed=1)
        assert set(clustering.assignment) == {r.wals_code for r in corpus}
        assert all(0 <= c < 3 for c in clustering.assignment.values())

    def test_empty_points_rejected(self):
        with pytest.raises(DataValidationError):
            cluster_coordinates([], k=1, seed=0)
