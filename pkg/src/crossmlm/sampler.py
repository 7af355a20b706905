"""Gibbs sampler for Gaussian cross-classified random-intercept models.

The model for observation i with classifications c_1(i), ..., c_K(i):

    y_i = x_i' beta + sum_k u^(k)_{c_k(i)} + e_i,     e_i ~ N(0, s2_e)
    u^(k)_j ~ N(0, s2_k)                              (simple / interaction)
    (u^(A)_j, u^(B)_j) ~ N_2(0, Sigma)                (correlated pair)

with a flat prior on beta, InvGamma(a, b) on every scalar variance and
InvWishart(nu0, S0) on each pair covariance.  All full conditionals are
conjugate, so one sweep is exact:

  1. beta   ~ N((X'X)^-1 X'(y - sum u),  s2_e (X'X)^-1)
  2. u_kj   ~ N(S_kj / (n_kj + s2_e/s2_k),  s2_e / (n_kj + s2_e/s2_k))
     where S_kj sums the partial residuals (y minus fixed part minus all
     other random terms) over cluster j.  Clusters within one
     classification touch disjoint observations, so the whole vector u_k
     is drawn at once.
  3. per correlated pair, each shared cluster's 2-vector from its
     bivariate normal full conditional (sequential scan; two clusters of
     the same pair can share observations), then
     Sigma ~ InvWishart(nu0 + J, S0 + sum_j v_j v_j')
  4. s2_k   ~ InvGamma(a + J_k/2, b + u_k'u_k / 2)
  5. s2_e   ~ InvGamma(a + n/2,  b + e'e / 2)

Randomness comes from one stream per chain (spawned from the seed),
consumed in a fixed update order whose draw count does not depend on
parameter values, so runs are bit-reproducible and translation-covariant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .design import DesignError, DesignSet

__all__ = [
    "SamplerError",
    "PriorSpec",
    "ChainState",
    "DrawsMatrix",
    "parameter_names",
    "gibbs_fit",
    "log_joint",
    "write_draws",
    "read_draws",
]

VAR_FLOOR = 1e-12

LOG_2PI = math.log(2.0 * math.pi)


class SamplerError(RuntimeError):
    """Numerical failure inside the sampler."""


@dataclass
class PriorSpec:
    """Conjugate prior settings.

    ``a``/``b`` are the inverse-gamma shape and scale shared by every
    scalar variance (residual included) unless overridden per name in
    ``variance_overrides``.  ``pair_df``/``pair_scale`` give the
    inverse-Wishart prior for every correlated-pair covariance.  Fixed
    effects carry an improper flat prior.
    """

    a: float = 0.001
    b: float = 0.001
    pair_df: float = 3.0
    pair_scale: np.ndarray | None = None  # 2x2, default identity
    variance_overrides: dict = field(default_factory=dict)

    def shape_scale(self, name: str) -> tuple[float, float]:
        return self.variance_overrides.get(name, (self.a, self.b))

    def pair_prior(self) -> tuple[float, np.ndarray]:
        scale = np.eye(2) if self.pair_scale is None else np.asarray(
            self.pair_scale, dtype=float)
        return float(self.pair_df), scale

    def validate(self) -> None:
        pairs = [(self.a, self.b), *self.variance_overrides.values()]
        for a, b in pairs:
            if not (a > 0 and b > 0):
                raise ValueError("inverse-gamma shape and scale must be positive")
        nu0, S0 = self.pair_prior()
        if not nu0 > 1:
            raise ValueError("pair degrees of freedom must exceed 1")
        if S0.shape != (2, 2) or not np.allclose(S0, S0.T):
            raise ValueError("pair scale must be symmetric 2x2")
        if np.linalg.eigvalsh(S0)[0] <= 0:
            raise ValueError("pair scale must be positive definite")


@dataclass
class ChainState:
    """One point of the chain: coefficients, random effects, variances."""

    beta: np.ndarray
    u: list  # per classification, length J_k arrays
    sigma2: np.ndarray  # per non-pair classification, design order
    pair_cov: list  # per correlated pair, 2x2 arrays
    sigma2_e: float
    iteration: int = 0


@dataclass
class DrawsMatrix:
    """Retained MCMC output: chains x iterations x named parameters."""

    names: tuple[str, ...]
    array: np.ndarray  # (chains, kept, P)
    iterations: int
    burnin: int
    thin: int
    seed: int | None
    floor_hits: int = 0
    effect_means: tuple | None = None  # posterior-mean u per classification
    effect_labels: tuple | None = None

    def __post_init__(self):
        self.names = tuple(self.names)
        self.array = np.asarray(self.array, dtype=float)
        if self.array.ndim != 3 or self.array.shape[2] != len(self.names):
            raise ValueError("draws array must be (chains, kept, parameters)")

    @property
    def n_chains(self) -> int:
        return self.array.shape[0]

    @property
    def n_kept(self) -> int:
        return self.array.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no parameter {name!r} in draws") from None

    def parameter(self, name: str) -> np.ndarray:
        """(chains, kept) draws of one parameter."""
        return self.array[:, :, self.index(name)]

    def pooled(self, name: str) -> np.ndarray:
        """All chains' draws of one parameter, flattened."""
        return self.parameter(name).reshape(-1)


def parameter_names(ds: DesignSet) -> tuple[str, ...]:
    """Canonical parameter naming: ``beta[i]``, ``sigma2[name]`` per simple
    or interaction classification in design order, three covariance entries
    per correlated pair, then ``sigma2[e]``."""
    names = [f"beta[{i}]" for i in range(ds.p)]
    first_member = {pair[0]: pair for pair in ds.pairs}
    members = ds.pair_members
    for k, cls in enumerate(ds.classifications):
        if cls.name == "e":
            raise DesignError(
                "classification name 'e' collides with the residual label")
        if k in members:
            pair = first_member.get(k)
            if pair is not None:
                a = ds.classifications[pair[0]].name
                b = ds.classifications[pair[1]].name
                names += [f"cov[{a},{b}][0][0]", f"cov[{a},{b}][0][1]",
                          f"cov[{a},{b}][1][1]"]
        else:
            names.append(f"sigma2[{cls.name}]")
    names.append("sigma2[e]")
    return tuple(names)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _initial_state(ds: DesignSet, y: np.ndarray) -> ChainState:
    """Deterministic start: OLS beta, zero effects, the OLS residual
    variance split equally across variance components."""
    n = ds.n
    if ds.p:
        beta, *_ = np.linalg.lstsq(ds.X, y, rcond=None)
        resid = y - ds.X @ beta
    else:
        beta = np.zeros(0)
        resid = y.copy()
    var0 = float(resid.var(ddof=1)) if n > 1 else 0.0
    ncomp = len(ds.nonpair_indices) + 2 * len(ds.pairs) + 1
    init = max(var0 / ncomp, VAR_FLOOR)
    return ChainState(
        beta=beta,
        u=[np.zeros(c.J) for c in ds.classifications],
        sigma2=np.full(len(ds.nonpair_indices), init),
        pair_cov=[init * np.eye(2) for _ in ds.pairs],
        sigma2_e=init,
        iteration=0,
    )


def _invgamma_draw(rng, shape: float, rate: float) -> float:
    # 1/X for X ~ Gamma(shape, rate); the gamma variate count consumed from
    # the stream depends only on the (structural) shape parameter.
    return rate / rng.standard_gamma(shape)


def _invwishart2_draw(rng, df: float, scale: np.ndarray) -> np.ndarray:
    """InvWishart(df, scale) for 2x2 via Bartlett on the inverse scale."""
    s00, s01, s11 = scale[0, 0], scale[0, 1], scale[1, 1]
    det = s00 * s11 - s01 * s01
    if not (det > 0 and s00 > 0):
        raise SamplerError("pair scale matrix not positive definite")
    # chol of scale^{-1} = [[s11, -s01], [-s01, s00]] / det
    p00, p01, p11 = s11 / det, -s01 / det, s00 / det
    l00 = math.sqrt(p00)
    l10 = p01 / l00
    l11 = math.sqrt(p11 - l10 * l10)
    c0 = 2.0 * rng.standard_gamma(df / 2.0)
    c1 = 2.0 * rng.standard_gamma((df - 1.0) / 2.0)
    z = rng.standard_normal()
    # T = L @ A with A = [[sqrt(c0), 0], [z, sqrt(c1)]]
    a00 = math.sqrt(c0)
    a11 = math.sqrt(c1)
    t00 = l00 * a00
    t10 = l10 * a00 + l11 * z
    t11 = l11 * a11
    # W = T T'; the draw is W^{-1}
    w00 = t00 * t00
    w01 = t00 * t10
    w11 = t10 * t10 + t11 * t11
    wdet = w00 * w11 - w01 * w01
    if wdet <= 0:
        raise SamplerError("degenerate Wishart draw for pair covariance")
    return np.array([[w11 / wdet, -w01 / wdet], [-w01 / wdet, w00 / wdet]])


class _PairPlan:
    """Precomputed index lists for one correlated pair."""

    def __init__(self, ds: DesignSet, ka: int, kd: int):
        o = ds.classifications[ka].assign
        d = ds.classifications[kd].assign
        self.ka, self.kd = ka, kd
        self.J = ds.classifications[ka].J
        self.obs_o = [np.flatnonzero(o == j) for j in range(self.J)]
        self.obs_d = [np.flatnonzero(d == j) for j in range(self.J)]
        self.nA = np.bincount(o, minlength=self.J).astype(float)
        self.nD = np.bincount(d, minlength=self.J).astype(float)
        self.m = np.bincount(o[o == d], minlength=self.J).astype(float)


def _run_chain(ds, y, prior, iterations, burnin, thin, rng, out, eff_sum):
    n = ds.n
    X, p = ds.X, ds.p
    cls = ds.classifications
    idx = [c.assign for c in cls]
    J = [c.J for c in cls]
    counts = [np.bincount(ix, minlength=j).astype(float)
              for ix, j in zip(idx, J)]
    nonpair = ds.nonpair_indices
    plans = [_PairPlan(ds, ka, kd) for ka, kd in ds.pairs]
    ig = [prior.shape_scale(cls[k].name) for k in nonpair]
    a_e, b_e = prior.shape_scale("e")
    nu0, S0 = prior.pair_prior()

    if p:
        A = X.T @ X
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise SamplerError("fixed-effect cross-product X'X is singular")
        A_inv = np.linalg.inv(A)
        C = np.linalg.cholesky(A_inv)
        Xt = np.ascontiguousarray(X.T)

    state = _initial_state(ds, y)
    beta, u = state.beta, state.u
    sigma2, pair_cov, s2e = state.sigma2, state.pair_cov, state.sigma2_e
    xb = X @ beta if p else np.zeros(n)
    r_full = y - xb

    # column layout of the output row
    nonpair_cols = {pos: p + _offset(ds, pos) for pos in range(len(nonpair))}
    pair_cols = {pi: p + _pair_offset(ds, pi) for pi in range(len(plans))}
    resid_col = out.shape[1] - 1

    floor_hits = 0
    row = 0
    for t in range(iterations):
        if p:
            ytilde = r_full + xb
            mean = A_inv @ (Xt @ ytilde)
            beta = mean + math.sqrt(s2e) * (C @ rng.standard_normal(p))
            xb = X @ beta
            r_full = ytilde - xb

        for pos, k in enumerate(nonpair):
            ix = idx[k]
            r_part = r_full + u[k][ix]
            S = np.bincount(ix, weights=r_part, minlength=J[k])
            denom = counts[k] + s2e / sigma2[pos]
            u[k] = S / denom + np.sqrt(s2e / denom) * rng.standard_normal(J[k])
            r_full = r_part - u[k][ix]

        for pi, plan in enumerate(plans):
            uA, uD = u[plan.ka], u[plan.kd]
            cov = pair_cov[pi]
            c00, c01, c11 = cov[0, 0], cov[0, 1], cov[1, 1]
            cdet = c00 * c11 - c01 * c01
            if not cdet > 0:
                raise SamplerError(
                    f"pair covariance not positive definite at iteration {t}")
            i00, i01, i11 = c11 / cdet, -c01 / cdet, c00 / cdet
            Z = rng.standard_normal((plan.J, 2))
            for j in range(plan.J):
                oj, dj = plan.obs_o[j], plan.obs_d[j]
                vA, vD = uA[j], uD[j]
                TA = r_full[oj].sum() + plan.nA[j] * vA + plan.m[j] * vD
                TD = r_full[dj].sum() + plan.m[j] * vA + plan.nD[j] * vD
                P00 = i00 + plan.nA[j] / s2e
                P01 = i01 + plan.m[j] / s2e
                P11 = i11 + plan.nD[j] / s2e
                pdet = P00 * P11 - P01 * P01
                q00, q01, q11 = P11 / pdet, -P01 / pdet, P00 / pdet
                mA = (q00 * TA + q01 * TD) / s2e
                mD = (q01 * TA + q11 * TD) / s2e
                l00 = math.sqrt(q00)
                l10 = q01 / l00
                l11 = math.sqrt(q11 - l10 * l10)
                z0, z1 = Z[j]
                vA_new = mA + l00 * z0
                vD_new = mD + l10 * z0 + l11 * z1
                if oj.size:
                    r_full[oj] -= vA_new - vA
                if dj.size:
                    r_full[dj] -= vD_new - vD
                uA[j] = vA_new
                uD[j] = vD_new
            S_post = S0 + np.array([
                [uA @ uA, uA @ uD],
                [uA @ uD, uD @ uD],
            ])
            cov = _invwishart2_draw(rng, nu0 + plan.J, S_post)
            if cov[0, 0] < VAR_FLOOR or cov[1, 1] < VAR_FLOOR:
                cov = cov + VAR_FLOOR * np.eye(2)
                floor_hits += 1
            pair_cov[pi] = cov

        for pos, k in enumerate(nonpair):
            a_k, b_k = ig[pos]
            val = _invgamma_draw(rng, a_k + J[k] / 2.0,
                                 b_k + 0.5 * float(u[k] @ u[k]))
            if val < VAR_FLOOR:
                val = VAR_FLOOR
                floor_hits += 1
            sigma2[pos] = val

        s2e = _invgamma_draw(rng, a_e + n / 2.0,
                             b_e + 0.5 * float(r_full @ r_full))
        if s2e < VAR_FLOOR:
            s2e = VAR_FLOOR
            floor_hits += 1

        ok = math.isfinite(s2e) and np.all(np.isfinite(sigma2))
        if ok and p:
            ok = bool(np.all(np.isfinite(beta)))
        if not ok:
            raise SamplerError(f"numeric overflow at iteration {t}")

        if t >= burnin and (t - burnin) % thin == 0:
            if p:
                out[row, :p] = beta
            for pos in range(len(nonpair)):
                out[row, nonpair_cols[pos]] = sigma2[pos]
            for pi in range(len(plans)):
                c = pair_cols[pi]
                cov = pair_cov[pi]
                out[row, c] = cov[0, 0]
                out[row, c + 1] = cov[0, 1]
                out[row, c + 2] = cov[1, 1]
            out[row, resid_col] = s2e
            for k in range(len(cls)):
                eff_sum[k] += u[k]
            row += 1
    return floor_hits


def _offset(ds: DesignSet, nonpair_pos: int) -> int:
    """Column offset (after betas) of the nonpair_pos'th scalar variance."""
    target = ds.nonpair_indices[nonpair_pos]
    off = 0
    first_member = {pair[0] for pair in ds.pairs}
    members = ds.pair_members
    for k in range(target):
        if k in members:
            if k in first_member:
                off += 3
        else:
            off += 1
    return off


def _pair_offset(ds: DesignSet, pi: int) -> int:
    target = ds.pairs[pi][0]
    off = 0
    first_member = {pair[0] for pair in ds.pairs}
    members = ds.pair_members
    for k in range(target):
        if k in members:
            if k in first_member:
                off += 3
        else:
            off += 1
    return off


def gibbs_fit(ds: DesignSet, y, prior: PriorSpec | None = None, *,
              iterations: int = 5000, burnin: int = 500, thin: int = 1,
              chains: int = 2, seed: int = 0) -> DrawsMatrix:
    """Run the Gibbs sampler; deterministic given (seed, control, data).

    Returns the retained draws for the named parameters (fixed effects,
    every variance, pair covariance entries) with ``(iterations - burnin)
    / thin`` rows per chain.
    """
    prior = PriorSpec() if prior is None else prior
    prior.validate()
    if not (iterations > burnin >= 0):
        raise ValueError("need iterations > burnin >= 0")
    if thin < 1 or chains < 1:
        raise ValueError("need thin >= 1 and chains >= 1")
    y = np.asarray(y, dtype=float)
    if y.shape != (ds.n,):
        raise ValueError(f"response must have shape ({ds.n},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")

    names = parameter_names(ds)
    kept = len(range(burnin, iterations, thin))
    array = np.empty((chains, kept, len(names)))
    eff_sums = [np.zeros(c.J) for c in ds.classifications]
    floor_hits = 0
    root = np.random.SeedSequence(seed)
    for c, child in enumerate(root.spawn(chains)):
        rng = np.random.default_rng(child)
        floor_hits += _run_chain(ds, y, prior, iterations, burnin, thin,
                                 rng, array[c], eff_sums)
    total = chains * kept
    effect_means = tuple(s / total for s in eff_sums)
    return DrawsMatrix(
        names=names,
        array=array,
        iterations=iterations,
        burnin=burnin,
        thin=thin,
        seed=seed,
        floor_hits=floor_hits,
        effect_means=effect_means,
        effect_labels=tuple(c.labels for c in ds.classifications),
    )


# ---------------------------------------------------------------------------
# Log joint density (for verifying the full conditionals)
# ---------------------------------------------------------------------------

def _invgamma_logpdf(x: float, a: float, b: float) -> float:
    return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(x) - b / x


def _invwishart2_logpdf(S: np.ndarray, nu: float, S0: np.ndarray) -> float:
    det0 = S0[0, 0] * S0[1, 1] - S0[0, 1] * S0[1, 0]
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    if det <= 0:
        raise ValueError("pair covariance not positive definite")
    inv = np.array([[S[1, 1], -S[0, 1]], [-S[0, 1], S[0, 0]]]) / det
    tr = S0[0, 0] * inv[0, 0] + 2.0 * S0[0, 1] * inv[0, 1] + S0[1, 1] * inv[1, 1]
    lgamma2 = (0.5 * math.log(math.pi) + math.lgamma(nu / 2.0)
               + math.lgamma(nu / 2.0 - 0.5))
    return (0.5 * nu * math.log(det0) - nu * math.log(2.0) - lgamma2
            - 0.5 * (nu + 3.0) * math.log(det) - 0.5 * tr)


def log_joint(ds: DesignSet, y, state: ChainState,
              prior: PriorSpec | None = None) -> float:
    """Unnormalized log posterior of a chain state (flat beta prior adds 0).

    The sum of the Gaussian log-likelihood, the random-effect log
    densities, and the variance log priors; each full conditional of the
    sampler is proportional to exp of this along its own coordinate.
    """
    prior = PriorSpec() if prior is None else prior
    y = np.asarray(y, dtype=float)
    if state.sigma2_e <= 0 or np.any(np.asarray(state.sigma2) <= 0):
        raise ValueError("non-positive variance in state")

    fitted = ds.X @ state.beta if ds.p else np.zeros(ds.n)
    for k, cls in enumerate(ds.classifications):
        fitted = fitted + np.asarray(state.u[k])[cls.assign]
    resid = y - fitted
    total = -0.5 * ds.n * (LOG_2PI + math.log(state.sigma2_e))
    total -= 0.5 * float(resid @ resid) / state.sigma2_e

    for pos, k in enumerate(ds.nonpair_indices):
        uk = np.asarray(state.u[k])
        s2 = float(state.sigma2[pos])
        total -= 0.5 * uk.size * (LOG_2PI + math.log(s2))
        total -= 0.5 * float(uk @ uk) / s2
        a_k, b_k = prior.shape_scale(ds.classifications[k].name)
        total += _invgamma_logpdf(s2, a_k, b_k)

    nu0, S0 = prior.pair_prior()
    for pi, (ka, kd) in enumerate(ds.pairs):
        cov = np.asarray(state.pair_cov[pi], dtype=float)
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        if det <= 0 or cov[0, 0] <= 0:
            raise ValueError("pair covariance not positive definite")
        i00, i01, i11 = cov[1, 1] / det, -cov[0, 1] / det, cov[0, 0] / det
        uA, uD = np.asarray(state.u[ka]), np.asarray(state.u[kd])
        Jp = uA.size
        quad = (i00 * float(uA @ uA) + 2.0 * i01 * float(uA @ uD)
                + i11 * float(uD @ uD))
        total -= 0.5 * Jp * (2.0 * LOG_2PI + math.log(det)) + 0.5 * quad
        total += _invwishart2_logpdf(cov, nu0, S0)

    a_e, b_e = prior.shape_scale("e")
    total += _invgamma_logpdf(state.sigma2_e, a_e, b_e)
    return float(total)


# ---------------------------------------------------------------------------
# Draws I/O
# ---------------------------------------------------------------------------

def write_draws(draws: DrawsMatrix, path) -> None:
    """Delimited text: one row per retained iteration, chain column first."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("chain",) + draws.names)
        for c in range(draws.n_chains):
            for r in range(draws.n_kept):
                writer.writerow(
                    [c] + [repr(float(v)) for v in draws.array[c, r]])


def read_draws(path) -> DrawsMatrix:
    """Read a draws file back into a DrawsMatrix.

    Control metadata is not stored in the file; the result carries the
    kept-draw geometry only (burnin 0, thin 1).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "chain":
            raise ValueError(f"not a draws file: {path}")
        names = tuple(header[1:])
        by_chain: dict[int, list] = {}
        for rec in reader:
            if not rec:
                continue
            by_chain.setdefault(int(rec[0]), []).append(
                [float(v) for v in rec[1:]])
    if not by_chain:
        raise ValueError(f"draws file has no rows: {path}")
    chains = sorted(by_chain)
    lengths = {len(rows) for rows in by_chain.values()}
    if len(lengths) != 1:
        raise ValueError("chains differ in retained length")
    array = np.asarray([by_chain[c] for c in chains], dtype=float)
    return DrawsMatrix(names=names, array=array, iterations=array.shape[1],
                       burnin=0, thin=1, seed=None)
