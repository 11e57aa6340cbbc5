import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigtrial.clustering import CanonicalLabels, canonicalize, kmeans
from sigtrial.errors import InvalidInput, TooFewPoints
from sigtrial.statnum import RngStream


def exhaustive_best_ss_k2(points):
    """Oracle: minimum within-cluster SS over all bipartitions (1-D or 2-D)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float).T).T
    n = pts.shape[0]
    best = np.inf
    for bits in itertools.product([0, 1], repeat=n - 1):
        lab = np.array((0,) + bits)
        if lab.min() == lab.max():
            continue
        ss = 0.0
        for c in (0, 1):
            grp = pts[lab == c]
            ss += float(np.sum((grp - grp.mean(axis=0)) ** 2))
        best = min(best, ss)
    return best


class TestKmeansOracle:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_exhaustive_bipartition(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 13))
        pts = rng.normal(0, 1, n)
        res = kmeans(pts, 2, RngStream(seed, 0))
        assert res.within_ss == pytest.approx(
            exhaustive_best_ss_k2(pts), abs=1e-9
        )

    def test_matches_exhaustive_2d(self):
        rng = np.random.default_rng(42)
        pts = rng.normal(0, 1, (10, 2))
        res = kmeans(pts, 2, RngStream(1, 0))
        assert res.within_ss == pytest.approx(
            exhaustive_best_ss_k2(pts), abs=1e-9
        )


class TestKmeansBehavior:
    def test_deterministic(self):
        pts = np.random.default_rng(3).normal(0, 1, (50, 2))
        a = kmeans(pts, 4, RngStream(7, 1))
        b = kmeans(pts, 4, RngStream(7, 1))
        assert np.array_equal(a.assignment, b.assignment)
        assert np.array_equal(a.centroids, b.centroids)

    def test_well_separated_groups_recovered(self):
        rng = np.random.default_rng(4)
        lo = rng.normal(0, 0.1, (30, 2))
        hi = rng.normal(5, 0.1, (20, 2))
        res = kmeans(np.vstack([lo, hi]), 2, RngStream(0, 0))
        labels = res.assignment
        assert len(set(labels[:30])) == 1
        assert len(set(labels[30:])) == 1
        assert labels[0] != labels[-1]

    def test_duplicate_points_fill_all_clusters(self):
        pts = np.array([0.0] * 6 + [1.0] * 2)
        res = kmeans(pts, 2, RngStream(5, 0))
        assert set(res.assignment) == {0, 1}

    def test_validation(self):
        with pytest.raises(InvalidInput):
            kmeans(np.ones((4, 3)), 2, RngStream(0, 0))
        with pytest.raises(InvalidInput):
            kmeans(np.ones(10), 3, RngStream(0, 0))
        with pytest.raises(InvalidInput):
            kmeans(np.array([1.0, np.nan, 2.0]), 2, RngStream(0, 0))
        with pytest.raises(TooFewPoints):
            kmeans(np.array([1.0]), 2, RngStream(0, 0))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(4, 40), st.sampled_from([2, 4]))
    def test_invariants(self, seed, n, k):
        rng = np.random.default_rng(seed)
        d = 1 if k == 2 else 2
        pts = rng.normal(0, 1, (n, d))
        res = kmeans(pts, k, RngStream(seed, 0))
        assert set(res.assignment) == set(range(k))
        assert res.within_ss >= 0.0
        assert np.all(np.isfinite(res.centroids))
        # each centroid is the mean of its members
        for c in range(k):
            assert np.allclose(
                res.centroids[c], pts[res.assignment == c].mean(axis=0)
            )


class TestCanonicalize:
    def test_k2_higher_sum_is_sensitive(self):
        lab = canonicalize(np.array([[3.0, 3.0], [0.0, 0.0]]))
        assert lab.mapping == (2, 1)
        lab = canonicalize(np.array([-1.0, 4.0]))
        assert lab.mapping == (1, 2)

    def test_k4_quadrants(self):
        cents = np.array([
            [5.0, 5.0],   # high/high -> 4
            [0.0, 0.0],   # low/low   -> 1
            [5.0, 0.0],   # high/low  -> 3
            [0.0, 5.0],   # low/high  -> 2
        ])
        lab = canonicalize(cents)
        assert lab.mapping == (4, 1, 3, 2)

    def test_k4_fallback_is_bijective(self):
        # three centroids share a quadrant corner pattern; the rank fallback
        # must still yield a bijection onto {1,2,3,4}
        cents = np.array([[0.0, 0.0], [0.1, 0.1], [0.2, 0.2], [5.0, 5.0]])
        lab = canonicalize(cents)
        assert sorted(lab.mapping) == [1, 2, 3, 4]

    def test_apply(self):
        lab = CanonicalLabels((2, 1))
        out = lab.apply(np.array([0, 1, 1, 0]))
        assert np.array_equal(out, [2, 1, 1, 2])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_always_bijective(self, seed):
        rng = np.random.default_rng(seed)
        cents = rng.normal(0, 1, (4, 2))
        assert sorted(canonicalize(cents).mapping) == [1, 2, 3, 4]
