import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigtrial.errors import InvalidInput, NotPositiveDefinite
from sigtrial.statnum import (
    CovarianceSpec,
    RngStream,
    cholesky,
    equicorrelation_matrix,
    fisher_exact,
    mvn_sample,
    normal_sf2,
    two_proportion_test,
)


class TestCovarianceSpec:
    def test_matrix_entries(self):
        m = CovarianceSpec(3, 0.25, 0.4).matrix()
        assert np.allclose(np.diag(m), 0.25)
        off = m[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 0.1)

    def test_dim_one(self):
        assert np.allclose(CovarianceSpec(1, 2.0, 0.0).matrix(), [[2.0]])

    @pytest.mark.parametrize(
        "dim,var,corr", [(0, 1.0, 0.0), (2, 0.0, 0.0), (2, -1.0, 0.0),
                         (2, 1.0, 1.0), (2, 1.0, -0.1)]
    )
    def test_invalid(self, dim, var, corr):
        with pytest.raises(InvalidInput):
            CovarianceSpec(dim, var, corr)

    @settings(max_examples=50, deadline=None)
    @given(
        dim=st.integers(1, 12),
        var=st.floats(0.01, 10.0),
        corr=st.floats(0.0, 0.95),
    )
    def test_cholesky_roundtrip(self, dim, var, corr):
        m = equicorrelation_matrix(dim, var, corr)
        L = cholesky(m)
        assert np.allclose(L @ L.T, m, atol=1e-10)
        assert np.allclose(np.triu(L, 1), 0.0)


class TestCholesky:
    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidInput):
            cholesky([[1.0, 0.5], [0.2, 1.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky([[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_nonsquare(self):
        with pytest.raises(Exception):
            cholesky(np.ones((2, 3)))


class TestRngStream:
    def test_same_key_same_sequence(self):
        a = RngStream(12345, 7).generator.standard_normal(5)
        b = RngStream(12345, 7).generator.standard_normal(5)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(12345, 0).generator.standard_normal(5)
        b = RngStream(12345, 1).generator.standard_normal(5)
        c = RngStream(54321, 0).generator.standard_normal(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_child_reproducible_and_order_free(self):
        r = RngStream(9, 2)
        a = r.child("fold", 3).generator.standard_normal(4)
        # consuming the parent or siblings does not disturb the child stream
        r.generator.standard_normal(100)
        r.child("fold", 4).generator.standard_normal(17)
        b = RngStream(9, 2).child("fold", 3).generator.standard_normal(4)
        assert np.array_equal(a, b)

    def test_child_key_parts_distinguish(self):
        base = RngStream(1, 0)
        draws = {
            name: tuple(base.child(*key).generator.standard_normal(3))
            for name, key in {
                "a": ("kmeans", 0), "b": ("kmeans", 1), "c": ("perm", 0),
                "d": (0,), "e": ("kmeans",),
            }.items()
        }
        assert len(set(draws.values())) == len(draws)


class TestMvnSample:
    def test_moments(self):
        cov = equicorrelation_matrix(3, 0.25, 0.4)
        L = cholesky(cov)
        mean = np.array([1.0, -2.0, 0.5])
        x = mvn_sample(mean, L, RngStream(3, 0), size=40000)
        assert x.shape == (40000, 3)
        assert np.allclose(x.mean(axis=0), mean, atol=0.02)
        assert np.allclose(np.cov(x.T), cov, atol=0.02)

    def test_single_draw_shape(self):
        L = cholesky(np.eye(2))
        x = mvn_sample([0.0, 0.0], L, RngStream(1, 0))
        assert x.shape == (2,)

    def test_dimension_mismatch(self):
        with pytest.raises(Exception):
            mvn_sample([0.0, 0.0], np.eye(3), RngStream(1, 0))


class TestNormalSf2:
    def test_known_values(self):
        assert normal_sf2(0.0) == pytest.approx(1.0)
        assert normal_sf2(1.959963984540054) == pytest.approx(0.05, abs=1e-12)
        assert normal_sf2(-1.959963984540054) == pytest.approx(0.05, abs=1e-12)


class TestTwoProportion:
    def test_against_closed_form(self):
        # z = (0.30-0.20)/sqrt(0.25*0.75*(1/100+1/100))
        res = two_proportion_test(30, 100, 20, 100)
        z = 0.1 / math.sqrt(0.25 * 0.75 * 0.02)
        assert res.statistic == pytest.approx(z, rel=1e-12)
        assert res.p_value == pytest.approx(math.erfc(z / math.sqrt(2)), rel=1e-12)

    def test_oracle(self):
        # independent recomputation via the normal survival function
        from scipy import stats

        rng = np.random.default_rng(0)
        for _ in range(200):
            n1, n2 = rng.integers(2, 80, 2)
            x1, x2 = rng.integers(0, n1 + 1), rng.integers(0, n2 + 1)
            res = two_proportion_test(int(x1), int(n1), int(x2), int(n2))
            pooled = (x1 + x2) / (n1 + n2)
            if pooled in (0.0, 1.0):
                assert res.degenerate and res.p_value == 1.0
                continue
            se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
            z = abs(x1 / n1 - x2 / n2) / se
            assert res.p_value == pytest.approx(2 * stats.norm.sf(z), rel=1e-10)

    def test_degenerate_all_zero(self):
        res = two_proportion_test(0, 10, 0, 12)
        assert res.degenerate and res.p_value == 1.0

    def test_continuity_correction_shrinks_statistic(self):
        plain = two_proportion_test(12, 30, 6, 30)
        cc = two_proportion_test(12, 30, 6, 30, continuity_correction=True)
        assert cc.statistic < plain.statistic

    def test_invalid_counts(self):
        with pytest.raises(InvalidInput):
            two_proportion_test(5, 4, 0, 10)


class TestFisherExact:
    def test_known_fractions(self):
        assert fisher_exact([[3, 1], [1, 3]]).p_value == pytest.approx(34 / 70)
        assert fisher_exact([[5, 0], [0, 5]]).p_value == pytest.approx(2 / 252)

    def test_degenerate_margins(self):
        for t in ([[0, 0], [3, 4]], [[2, 3], [0, 0]], [[0, 3], [0, 4]]):
            res = fisher_exact(t)
            assert res.degenerate and res.p_value == 1.0

    def test_enumeration_oracle_exhaustive(self):
        # independent enumeration from scipy's hypergeometric pmf, same
        # probability-mass rule, all tables with total <= 30
        from scipy import stats

        for total in range(1, 31):
            for r1 in range(0, total + 1):
                for c1 in range(0, total + 1):
                    lo = max(0, r1 + c1 - total)
                    hi = min(r1, c1)
                    for a in range(lo, hi + 1):
                        table = [[a, r1 - a], [c1 - a, total - r1 - c1 + a]]
                        res = fisher_exact(table)
                        if r1 in (0, total) or c1 in (0, total):
                            assert res.p_value == 1.0
                            continue
                        support = np.arange(lo, hi + 1)
                        pmf = stats.hypergeom.pmf(support, total, c1, r1)
                        p_obs = stats.hypergeom.pmf(a, total, c1, r1)
                        expected = pmf[pmf <= p_obs * (1 + 1e-7)].sum()
                        assert res.p_value == pytest.approx(
                            min(expected, 1.0), rel=1e-9
                        ), table

    def test_rejects_bad_shapes(self):
        with pytest.raises(InvalidInput):
            fisher_exact([[1, 2, 3], [4, 5, 6]])
        with pytest.raises(InvalidInput):
            fisher_exact([[-1, 2], [3, 4]])
