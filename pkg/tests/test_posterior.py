import numpy as np
import pytest

from crossmlm import DrawsMatrix, effective_sample_size, split_rhat, \
    summarize, vpc, vpc_shares


def draws_from(names, array, **kw):
    array = np.asarray(array, dtype=float)
    meta = dict(iterations=array.shape[1], burnin=0, thin=1, seed=0)
    meta.update(kw)
    return DrawsMatrix(names=tuple(names), array=array, **meta)


def variance_draws(school, neigh, resid):
    school = np.atleast_2d(np.asarray(school, dtype=float))
    cols = np.stack([np.atleast_2d(school),
                     np.atleast_2d(neigh),
                     np.atleast_2d(resid)], axis=2)
    return draws_from(["sigma2[school]", "sigma2[neigh]", "sigma2[e]"], cols)


class TestSummarize:
    def test_mean_of_small_sequence(self):
        d = draws_from(["beta[0]", "sigma2[e]"],
                       [[[1.0, 1.0], [2.0, 1.0], [3.0, 1.0], [4.0, 1.0]]])
        row = summarize(d).row("beta[0]")
        assert row.mean == pytest.approx(2.5)

    def test_constant_chains_have_rhat_one(self):
        d = draws_from(["beta[0]", "sigma2[e]"],
                       np.ones((2, 8, 2)) * 3.0)
        table = summarize(d)
        for row in table.rows:
            assert row.sd == 0.0
            assert row.rhat == 1.0

    def test_iid_normal_rhat_and_ess(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((4, 1000))
            r = split_rhat(x)
            ess = effective_sample_size(x)
            assert 0.99 <= r <= 1.01
            assert abs(ess - 4000) <= 0.2 * 4000

    def test_quantile_monotonicity(self):
        rng = np.random.default_rng(3)
        d = draws_from(["beta[0]", "sigma2[e]"],
                       rng.standard_normal((2, 500, 2)) ** 2)
        for row in summarize(d).rows:
            assert row.q2_5 <= row.median <= row.q97_5

    def test_chain_order_invariance(self):
        rng = np.random.default_rng(9)
        arr = rng.standard_normal((3, 200, 2))
        d1 = draws_from(["beta[0]", "sigma2[e]"], arr)
        d2 = draws_from(["beta[0]", "sigma2[e]"], arr[::-1])
        t1, t2 = summarize(d1), summarize(d2)
        for r1, r2 in zip(t1.rows, t2.rows):
            assert r1.mean == pytest.approx(r2.mean, abs=1e-12)
            assert r1.rhat == pytest.approx(r2.rhat, abs=1e-12)
            assert r1.ess == pytest.approx(r2.ess, rel=1e-9)

    def test_split_detects_trend(self):
        # a strong within-chain trend must push split-Rhat well above 1
        trend = np.linspace(0.0, 5.0, 400)[None, :].repeat(2, axis=0)
        noise = np.random.default_rng(0).standard_normal((2, 400)) * 0.1
        assert split_rhat(trend + noise) > 1.5

    def test_derived_correlation_row(self):
        rng = np.random.default_rng(5)
        c00 = 0.5 + rng.random((2, 300))
        c11 = 0.4 + rng.random((2, 300))
        c01 = 0.3 * np.sqrt(c00 * c11)
        beta = rng.standard_normal((2, 300))
        resid = 0.5 + rng.random((2, 300))
        arr = np.stack([beta, c00, c01, c11, resid], axis=2)
        d = draws_from(["beta[0]", "cov[o,d][0][0]", "cov[o,d][0][1]",
                        "cov[o,d][1][1]", "sigma2[e]"], arr)
        row = summarize(d).row("corr[o,d]")
        assert row.mean == pytest.approx(0.3, abs=1e-12)

    def test_too_few_draws(self):
        d = draws_from(["sigma2[e]"], np.ones((2, 3, 1)))
        with pytest.raises(ValueError, match="too few"):
            summarize(d)


class TestVPC:
    def test_single_draw_shares(self):
        d = variance_draws([0.2], [0.3], [0.5])
        names, shares = vpc_shares(d)
        assert names == ("school", "neigh", "e")
        np.testing.assert_allclose(shares[0], [0.2, 0.3, 0.5])

    def test_zero_component(self):
        d = variance_draws([0.0, 0.0], [0.5, 0.5], [0.5, 0.5])
        report = vpc(d)
        assert report.row("school").mean == 0.0

    def test_equal_components_equal_shares(self):
        d = variance_draws([0.4], [0.4], [0.4])
        _, shares = vpc_shares(d)
        np.testing.assert_allclose(shares[0], [1 / 3] * 3)

    def test_shares_sum_to_one_per_draw(self):
        rng = np.random.default_rng(1)
        d = variance_draws(rng.random(500) + 1e-6, rng.random(500) + 1e-6,
                           rng.random(500) + 1e-6)
        _, shares = vpc_shares(d)
        np.testing.assert_allclose(shares.sum(axis=1), 1.0, rtol=0,
                                   atol=1e-12)

    def test_pair_diagonals_enter_as_components(self):
        rng = np.random.default_rng(2)
        c00 = 0.5 + rng.random((1, 50))
        c11 = 0.4 + rng.random((1, 50))
        c01 = 0.1 * np.sqrt(c00 * c11)
        resid = 0.5 + rng.random((1, 50))
        arr = np.stack([c00, c01, c11, resid], axis=2)
        d = draws_from(["cov[origin,dest][0][0]", "cov[origin,dest][0][1]",
                        "cov[origin,dest][1][1]", "sigma2[e]"], arr)
        names, shares = vpc_shares(d)
        assert names == ("origin", "dest", "e")
        np.testing.assert_allclose(shares.sum(axis=1), 1.0, atol=1e-12)

    def test_missing_residual_rejected(self):
        d = draws_from(["sigma2[school]"], np.ones((1, 5, 1)))
        with pytest.raises(ValueError, match="sigma2\\[e\\]"):
            vpc(d)
