"""Scikit-learn style estimators wrapping the Gibbs sampler and ML oracle.

Both estimators take the model formula and engine settings in the
constructor (so ``get_params``/``set_params``/``clone`` work as usual) and
accept the data table in ``fit`` — a Dataset, a mapping of column arrays,
or a CSV path; the formula decides which columns are numeric.  Fitted
state lives in trailing-underscore attributes and ``predict`` returns
conditional means using the estimated fixed effects plus the cluster
effects of labels seen during fitting (unseen labels fall back to the
zero prior mean).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import DataError, Dataset, read_table
from .design import DesignSet, build_design
from .formula import ModelFormula, parse_formula
from .oracle import VarianceComponents, blup, ml_fit, named_components
from .posterior import summarize, vpc
from .sampler import PriorSpec, gibbs_fit

__all__ = ["as_dataset", "CrossClassifiedGibbs", "CrossClassifiedML"]


def _parsed(formula) -> ModelFormula:
    return formula if isinstance(formula, ModelFormula) else parse_formula(formula)


def as_dataset(data, formula: ModelFormula) -> Dataset:
    """Coerce fit/predict input to a Dataset with formula-implied roles."""
    numeric = (formula.response, *formula.fixed_terms)
    if isinstance(data, Dataset):
        return data
    if isinstance(data, (str, Path)):
        return read_table(data, numeric=[c for c in numeric])
    if hasattr(data, "items"):
        columns = {str(k): np.asarray(v) for k, v in data.items()}
        return Dataset(columns=columns,
                       numeric=tuple(c for c in numeric if c in columns))
    raise DataError(
        "data must be a Dataset, a mapping of columns, or a CSV path")


class _FormulaEstimator(BaseEstimator):
    """Shared fit plumbing: parse, validate, design, predict."""

    def _design(self, data) -> tuple[DesignSet, np.ndarray, Dataset]:
        formula = _parsed(self.formula)
        d = as_dataset(data, formula)
        ds = build_design(formula, d)
        y = d.numeric_column(formula.response)
        self.formula_ = formula
        self.design_ = ds
        return ds, y, d

    def predict(self, data):
        """Conditional mean: fixed part plus estimated cluster effects."""
        check_is_fitted(self, "coef_")
        formula = self.formula_
        d = as_dataset(data, formula)
        cols = [np.ones(d.n)] if formula.intercept else []
        cols += [d.numeric_column(t) for t in formula.fixed_terms]
        X = np.column_stack(cols) if cols else np.empty((d.n, 0))
        yhat = X @ self.coef_ if X.shape[1] else np.zeros(d.n)
        for cls, values in zip(self.design_.classifications,
                               self.effects_):
            lookup = {lab: values[j] for j, lab in enumerate(cls.labels)}
            source = cls.name if cls.name in d.columns else None
            if source is None:
                continue  # derived interaction names are resolved below
            labels = d.label_column(source)
            yhat += np.asarray([lookup.get(lab, 0.0) for lab in labels])
        for cls, values in zip(self.design_.classifications, self.effects_):
            if cls.name in d.columns or ":" not in cls.name:
                continue
            a, b = cls.name.split(":", 1)
            la, lb = d.label_column(a), d.label_column(b)
            lookup = {lab: values[j] for j, lab in enumerate(cls.labels)}
            yhat += np.asarray([
                lookup.get(f"{la[i]}:{lb[i]}", 0.0) for i in range(d.n)])
        return yhat


class CrossClassifiedGibbs(_FormulaEstimator):
    """Bayesian cross-classified model via conjugate Gibbs sampling.

    Parameters mirror the sampler controls; priors are the diffuse
    conjugate defaults unless overridden.  After ``fit``: ``draws_``
    (retained draws), ``summary_`` (per-parameter table with split-R-hat
    and ESS), ``vpc_`` (variance partition), ``coef_`` (posterior-mean
    fixed effects) and ``effects_`` (posterior-mean cluster effects).
    """

    def __init__(self, formula="y ~ 1", *, iterations=5000, burnin=500,
                 thin=1, chains=2, seed=0, prior_a=0.001, prior_b=0.001,
                 pair_df=3.0, pair_scale=None):
        self.formula = formula
        self.iterations = iterations
        self.burnin = burnin
        self.thin = thin
        self.chains = chains
        self.seed = seed
        self.prior_a = prior_a
        self.prior_b = prior_b
        self.pair_df = pair_df
        self.pair_scale = pair_scale

    def fit(self, data, y=None):
        ds, resp, _ = self._design(data)
        prior = PriorSpec(a=self.prior_a, b=self.prior_b,
                          pair_df=self.pair_df, pair_scale=self.pair_scale)
        draws = gibbs_fit(ds, resp, prior,
                          iterations=self.iterations, burnin=self.burnin,
                          thin=self.thin, chains=self.chains, seed=self.seed)
        self.draws_ = draws
        self.summary_ = summarize(draws)
        self.vpc_ = vpc(draws)
        p = ds.p
        self.coef_ = draws.array[:, :, :p].reshape(-1, p).mean(axis=0)
        self.effects_ = list(draws.effect_means)
        return self


class CrossClassifiedML(_FormulaEstimator):
    """Dense marginal maximum likelihood (small instances only).

    After ``fit``: ``theta_`` (variance components), ``coef_`` (GLS fixed
    effects at the optimum), ``loglik_``, and BLUP ``effects_``.
    """

    def __init__(self, formula="y ~ 1", *, restarts=3, tolerance=1e-8,
                 max_iter=10000):
        self.formula = formula
        self.restarts = restarts
        self.tolerance = tolerance
        self.max_iter = max_iter

    def fit(self, data, y=None):
        ds, resp, _ = self._design(data)
        res = ml_fit(ds, resp, restarts=self.restarts,
                     tolerance=self.tolerance, max_iter=self.max_iter)
        self.result_ = res
        self.theta_ = res.theta
        self.loglik_ = res.loglik
        coef, effects = blup(ds, resp, res.theta)
        self.coef_ = coef
        self.effects_ = effects
        return self

    def components(self) -> dict:
        """Flat name -> value view of the estimated variance components."""
        check_is_fitted(self, "theta_")
        return named_components(self.design_, self.theta_)
