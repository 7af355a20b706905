"""Dense marginal maximum-likelihood oracle for small instances.

Integrating the random intercepts out of the model leaves

    y ~ N(X beta,  V),
    V = s2_e I + sum_k s2_k Z_k Z_k'
        + sum_pairs [ S00 Z_A Z_A' + S11 Z_B Z_B' + S01 (Z_A Z_B' + Z_B Z_A') ]

where Z_k Z_k'[i,j] = 1 exactly when observations i and j share cluster k.
``profile_loglik`` evaluates the log-likelihood with beta profiled out at
its GLS optimum; ``ml_fit`` maximizes it over the variance components by
Nelder-Mead direct search on log variances (log-Cholesky for pair blocks),
so positivity needs no constraints.  V is held as an explicit dense n x n
matrix behind a hard size guard: this module exists to verify the sampler
and to exhibit likelihood geometry (e.g. the flat ridge that makes a
one-observation-per-cell interaction unidentifiable), not to scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize
from scipy.linalg import cho_solve

from .design import DesignSet

__all__ = [
    "OracleError",
    "DENSE_GUARD",
    "VarianceComponents",
    "MarginalModel",
    "ProfileFit",
    "MLFit",
    "profile_loglik",
    "ml_fit",
    "blup",
    "named_components",
]

DENSE_GUARD = 2000
LOG_2PI = math.log(2.0 * math.pi)

# search bounds for log variances / log Cholesky diagonals
_LOG_LO = math.log(1e-10)
_LOG_HI = math.log(1e10)


class OracleError(RuntimeError):
    """Dense-oracle failure: size guard, non-PD covariance, no convergence."""


@dataclass
class VarianceComponents:
    """theta: one variance per simple/interaction classification (design
    order), a 2x2 covariance block per correlated pair, and the residual."""

    sigma2: np.ndarray
    pair_cov: tuple
    sigma2_e: float

    def __post_init__(self):
        self.sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        self.pair_cov = tuple(np.asarray(c, dtype=float) for c in self.pair_cov)

    def validate(self, ds: DesignSet) -> None:
        if self.sigma2.shape != (len(ds.nonpair_indices),):
            raise ValueError("sigma2 length must match non-pair classifications")
        if len(self.pair_cov) != len(ds.pairs):
            raise ValueError("one covariance block per correlated pair required")
        if self.sigma2_e <= 0 or np.any(self.sigma2 < 0):
            raise ValueError("variances must be positive (residual strictly)")
        for c in self.pair_cov:
            if c.shape != (2, 2) or abs(c[0, 1] - c[1, 0]) > 1e-12:
                raise ValueError("pair blocks must be symmetric 2x2")
            if np.linalg.eigvalsh(c)[0] < 0:
                raise ValueError("pair blocks must be positive semidefinite")


@dataclass
class MarginalModel:
    """A design plus variance components, small enough for dense V."""

    design: DesignSet
    theta: VarianceComponents

    def __post_init__(self):
        if self.design.n > DENSE_GUARD:
            raise OracleError(
                f"dense oracle limited to n <= {DENSE_GUARD}, got {self.design.n}")
        self.theta.validate(self.design)

    def covariance(self) -> np.ndarray:
        return _marginal_cov(self.design, self.theta)


class ProfileFit(NamedTuple):
    loglik: float
    beta_hat: np.ndarray


@dataclass
class MLFit:
    theta: VarianceComponents
    beta: np.ndarray
    loglik: float
    converged: bool
    n_evaluations: int


def _marginal_cov(ds: DesignSet, vc: VarianceComponents) -> np.ndarray:
    n = ds.n
    V = vc.sigma2_e * np.eye(n)
    for pos, k in enumerate(ds.nonpair_indices):
        a = ds.classifications[k].assign
        V += vc.sigma2[pos] * (a[:, None] == a[None, :])
    for pi, (ka, kd) in enumerate(ds.pairs):
        o = ds.classifications[ka].assign
        d = ds.classifications[kd].assign
        c = vc.pair_cov[pi]
        V += c[0, 0] * (o[:, None] == o[None, :])
        V += c[1, 1] * (d[:, None] == d[None, :])
        cross = (o[:, None] == d[None, :]).astype(float)
        V += c[0, 1] * (cross + cross.T)
    return V


def profile_loglik(m: MarginalModel, y) -> ProfileFit:
    """Marginal log-likelihood with beta at its GLS optimum.

    beta_hat = (X'V^-1 X)^-1 X'V^-1 y and
    loglik = -0.5 [ n log 2pi + log det V + (y - X beta_hat)' V^-1 (y - X beta_hat) ].
    """
    ds = m.design
    y = np.asarray(y, dtype=float)
    V = m.covariance()
    try:
        L = np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        raise OracleError("marginal covariance V is not positive definite") from None
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    Vi_y = cho_solve((L, True), y)
    if ds.p:
        Vi_X = cho_solve((L, True), ds.X)
        XtViX = ds.X.T @ Vi_X
        try:
            beta = np.linalg.solve(XtViX, ds.X.T @ Vi_y)
        except np.linalg.LinAlgError:
            raise OracleError("X'V^-1X is singular") from None
        Vi_resid = Vi_y - Vi_X @ beta
        resid = y - ds.X @ beta
    else:
        beta = np.zeros(0)
        Vi_resid = Vi_y
        resid = y
    quad = float(resid @ Vi_resid)
    loglik = -0.5 * (ds.n * LOG_2PI + logdet + quad)
    return ProfileFit(loglik=loglik, beta_hat=beta)


# ---------------------------------------------------------------------------
# Direct-search maximum likelihood
# ---------------------------------------------------------------------------

def _initial_components(ds: DesignSet, y: np.ndarray) -> VarianceComponents:
    # same scale-aware heuristic as the sampler start
    if ds.p:
        beta, *_ = np.linalg.lstsq(ds.X, y, rcond=None)
        resid = y - ds.X @ beta
    else:
        resid = y
    var0 = float(resid.var(ddof=1)) if ds.n > 1 else 0.0
    ncomp = len(ds.nonpair_indices) + 2 * len(ds.pairs) + 1
    init = max(var0 / ncomp, 1e-4)
    return VarianceComponents(
        sigma2=np.full(len(ds.nonpair_indices), init),
        pair_cov=tuple(init * np.eye(2) for _ in ds.pairs),
        sigma2_e=init,
    )


def _pack(vc: VarianceComponents) -> np.ndarray:
    x = [math.log(v) for v in vc.sigma2]
    for c in vc.pair_cov:
        l00 = math.sqrt(c[0, 0])
        l10 = c[0, 1] / l00
        l11sq = max(c[1, 1] - l10 * l10, 1e-12)
        x += [math.log(c[0, 0]), l10, math.log(l11sq)]
    x.append(math.log(vc.sigma2_e))
    return np.asarray(x)


def _unpack(ds: DesignSet, x: np.ndarray) -> VarianceComponents:
    x = np.clip(np.asarray(x, dtype=float), -1e6, 1e6)
    K = len(ds.nonpair_indices)
    sigma2 = np.exp(np.clip(x[:K], _LOG_LO, _LOG_HI))
    pair_cov = []
    at = K
    for _ in ds.pairs:
        l00 = math.exp(0.5 * float(np.clip(x[at], _LOG_LO, _LOG_HI)))
        l10 = float(np.clip(x[at + 1], -1e5, 1e5))
        l11 = math.exp(0.5 * float(np.clip(x[at + 2], _LOG_LO, _LOG_HI)))
        pair_cov.append(np.array([
            [l00 * l00, l00 * l10],
            [l00 * l10, l10 * l10 + l11 * l11],
        ]))
        at += 3
    s2e = math.exp(float(np.clip(x[at], _LOG_LO, _LOG_HI)))
    return VarianceComponents(sigma2=sigma2, pair_cov=tuple(pair_cov),
                              sigma2_e=s2e)


def _scaled(vc: VarianceComponents, factor: float) -> VarianceComponents:
    return VarianceComponents(
        sigma2=vc.sigma2 * factor,
        pair_cov=tuple(c * factor for c in vc.pair_cov),
        sigma2_e=vc.sigma2_e * factor,
    )


def _start_factors(restarts: int) -> list[float]:
    factors = [1.0]
    step = 1
    while len(factors) < restarts:
        factors.append(10.0 ** -step)
        if len(factors) < restarts:
            factors.append(10.0 ** step)
        step += 1
    return factors[:restarts]


def ml_fit(ds: DesignSet, y, *, restarts: int = 3, tolerance: float = 1e-8,
           max_iter: int = 10000) -> MLFit:
    """Maximize the profile log-likelihood over the variance components.

    Multi-start Nelder-Mead on log variances, started from the
    OLS-residual heuristic scaled by 1x, 0.1x, 10x (more restarts widen
    the ladder).  A start converges when the simplex log-likelihood
    spread falls below ``tolerance``; it is an error if no start
    converges within ``max_iter`` evaluations.
    """
    if ds.n > DENSE_GUARD:
        raise OracleError(
            f"dense oracle limited to n <= {DENSE_GUARD}, got {ds.n}")
    if restarts < 1:
        raise ValueError("need at least one start")
    y = np.asarray(y, dtype=float)

    evals = 0

    def objective(x):
        nonlocal evals
        evals += 1
        vc = _unpack(ds, x)
        try:
            return -profile_loglik(MarginalModel(ds, vc), y).loglik
        except OracleError:
            return np.inf

    vc0 = _initial_components(ds, y)
    if not np.isfinite(objective(_pack(vc0))):
        raise OracleError("profile log-likelihood undefined at the start "
                          "(singular X'V^-1X?)")

    best = None
    any_converged = False
    for factor in _start_factors(restarts):
        x0 = _pack(_scaled(vc0, factor))
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"maxiter": max_iter, "maxfev": max_iter,
                     "fatol": tolerance, "xatol": 1e-6},
        )
        if res.success:
            any_converged = True
            if best is None or res.fun < best.fun:
                best = res
    if not any_converged:
        raise OracleError(
            f"no Nelder-Mead start converged within {max_iter} iterations")

    theta = _unpack(ds, best.x)
    pf = profile_loglik(MarginalModel(ds, theta), y)
    return MLFit(theta=theta, beta=pf.beta_hat, loglik=pf.loglik,
                 converged=True, n_evaluations=evals)


def blup(ds: DesignSet, y, vc: VarianceComponents):
    """GLS fixed effects and best linear unbiased predictors of the
    random intercepts at the given variance components."""
    m = MarginalModel(ds, vc)
    y = np.asarray(y, dtype=float)
    V = m.covariance()
    L = np.linalg.cholesky(V)
    pf = profile_loglik(m, y)
    resid = y - (ds.X @ pf.beta_hat if ds.p else 0.0)
    w = cho_solve((L, True), resid)
    effects = [None] * len(ds.classifications)
    for pos, k in enumerate(ds.nonpair_indices):
        a = ds.classifications[k].assign
        effects[k] = vc.sigma2[pos] * np.bincount(
            a, weights=w, minlength=ds.classifications[k].J)
    for pi, (ka, kd) in enumerate(ds.pairs):
        o = ds.classifications[ka].assign
        d = ds.classifications[kd].assign
        J = ds.classifications[ka].J
        wo = np.bincount(o, weights=w, minlength=J)
        wd = np.bincount(d, weights=w, minlength=J)
        c = vc.pair_cov[pi]
        effects[ka] = c[0, 0] * wo + c[0, 1] * wd
        effects[kd] = c[0, 1] * wo + c[1, 1] * wd
    return pf.beta_hat, effects


def named_components(ds: DesignSet, vc: VarianceComponents) -> dict:
    """Flat name -> value view matching the sampler's parameter naming."""
    out = {}
    members = ds.pair_members
    first = {pair[0]: pi for pi, pair in enumerate(ds.pairs)}
    pos = 0
    for k, cls in enumerate(ds.classifications):
        if k in members:
            pi = first.get(k)
            if pi is not None:
                a = ds.classifications[ds.pairs[pi][0]].name
                b = ds.classifications[ds.pairs[pi][1]].name
                c = vc.pair_cov[pi]
                out[f"cov[{a},{b}][0][0]"] = float(c[0, 0])
                out[f"cov[{a},{b}][0][1]"] = float(c[0, 1])
                out[f"cov[{a},{b}][1][1]"] = float(c[1, 1])
        else:
            out[f"sigma2[{cls.name}]"] = float(vc.sigma2[pos])
            pos += 1
    out["sigma2[e]"] = float(vc.sigma2_e)
    return out
