import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from crossmlm import CrossClassifiedGibbs, CrossClassifiedML, as_dataset, \
    blup, parse_formula, write_table
from test_data import make_dataset


def table(seed=0, n=120):
    rng = np.random.default_rng(seed)
    school = rng.integers(0, 6, size=n)
    neigh = rng.integers(0, 5, size=n)
    x = rng.standard_normal(n)
    y = (0.4 + 0.9 * x + rng.normal(0, 0.5, 6)[school]
         + rng.normal(0, 0.4, 5)[neigh] + rng.normal(0, 0.7, n))
    return make_dataset(y=y, x=x,
                        school=[f"s{v}" for v in school],
                        neigh=[f"n{v}" for v in neigh])


FORMULA = "y ~ 1 + x + (1|school) + (1|neigh)"


class TestGibbsEstimator:
    def test_get_params_set_params_clone(self):
        est = CrossClassifiedGibbs(FORMULA, iterations=800, burnin=200,
                                   seed=3)
        params = est.get_params()
        assert params["formula"] == FORMULA
        assert params["iterations"] == 800
        twin = clone(est)
        assert twin.get_params() == params
        est.set_params(chains=1)
        assert est.chains == 1

    def test_fit_attributes(self):
        est = CrossClassifiedGibbs(FORMULA, iterations=600, burnin=150,
                                   chains=2, seed=1)
        out = est.fit(table())
        assert out is est
        assert est.coef_.shape == (2,)
        assert est.draws_.n_chains == 2
        assert {"beta[0]", "sigma2[school]", "sigma2[e]"} <= set(
            est.draws_.names)
        assert est.summary_.row("sigma2[school]").mean > 0
        assert est.vpc_.row("e").mean > 0

    def test_predict_length_and_unseen_labels(self):
        d = table()
        est = CrossClassifiedGibbs(FORMULA, iterations=500, burnin=100,
                                   chains=1, seed=2).fit(d)
        yhat = est.predict(d)
        assert yhat.shape == (d.n,)
        assert np.all(np.isfinite(yhat))
        # unseen cluster labels contribute the zero prior mean
        new = make_dataset(y=[0.0], x=[1.0], school=["s99"], neigh=["n99"])
        lone = est.predict(new)
        assert lone[0] == pytest.approx(est.coef_[0] + est.coef_[1], abs=1e-9)

    def test_predict_before_fit_raises(self):
        est = CrossClassifiedGibbs(FORMULA)
        with pytest.raises(NotFittedError):
            est.predict(table())

    def test_mapping_and_path_inputs(self, tmp_path):
        d = table()
        est1 = CrossClassifiedGibbs(FORMULA, iterations=300, burnin=50,
                                    chains=1, seed=5)
        est1.fit({k: v for k, v in d.columns.items()})
        p = tmp_path / "d.csv"
        write_table(d, p)
        est2 = CrossClassifiedGibbs(FORMULA, iterations=300, burnin=50,
                                    chains=1, seed=5).fit(str(p))
        np.testing.assert_allclose(est1.coef_, est2.coef_, atol=1e-12)

    def test_deterministic_given_seed(self):
        a = CrossClassifiedGibbs(FORMULA, iterations=300, burnin=50,
                                 chains=1, seed=7).fit(table())
        b = CrossClassifiedGibbs(FORMULA, iterations=300, burnin=50,
                                 chains=1, seed=7).fit(table())
        np.testing.assert_array_equal(a.draws_.array, b.draws_.array)


class TestMLEstimator:
    def test_fit_and_components(self):
        d = make_dataset(y=[0.0, 1.0, 10.0, 11.0], g=["a", "a", "b", "b"])
        est = CrossClassifiedML("y ~ 1 + (1|g)").fit(d)
        assert est.theta_.sigma2_e == pytest.approx(0.5, rel=1e-3)
        comp = est.components()
        assert comp["sigma2[g]"] == pytest.approx(24.75, rel=1e-3)
        assert est.coef_[0] == pytest.approx(5.5, abs=1e-4)

    def test_predict_matches_blup(self):
        d = table(n=60)
        est = CrossClassifiedML(FORMULA).fit(d)
        f = parse_formula(FORMULA)
        ds = est.design_
        beta, effects = blup(ds, d.numeric_column("y"), est.theta_)
        yhat = est.predict(d)
        manual = ds.X @ beta
        for cls, eff in zip(ds.classifications, effects):
            manual = manual + eff[cls.assign]
        np.testing.assert_allclose(yhat, manual, atol=1e-10)

    def test_clone(self):
        est = CrossClassifiedML("y ~ 1 + (1|g)", restarts=2, tolerance=1e-6)
        assert clone(est).get_params() == est.get_params()


def test_as_dataset_roles_follow_formula():
    f = parse_formula(FORMULA)
    d = as_dataset({"y": [0.1, 0.2], "x": [1.0, 2.0],
                    "school": ["a", "b"], "neigh": ["u", "v"]}, f)
    assert set(d.numeric) == {"y", "x"}
    assert set(d.categorical) == {"school", "neigh"}
