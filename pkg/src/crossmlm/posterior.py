"""Summaries and diagnostics of retained draws.

Split-R-hat follows the Gelman-Rubin construction on half-chains: with m
half-chains of length n, W the mean within-chain variance and B the
between-chain variance of the half-chain means,

    var+ = (n-1)/n W + B/n,      R-hat = sqrt(var+ / W),

reported as exactly 1 when every half-chain is constant.  Effective sample
size combines the per-chain autocovariances (FFT) into pooled lag
correlations and truncates the sum at Geyer's initial positive sequence:

    ESS = m n / (1 + 2 sum rho_t).

Variance partition coefficients are computed per draw — each variance
component's share of the total including the residual — so the reported
intervals propagate posterior uncertainty; correlated-pair blocks
contribute their two diagonal variances as separate components.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .sampler import DrawsMatrix

__all__ = [
    "SummaryRow",
    "SummaryTable",
    "VPCRow",
    "VPCReport",
    "summarize",
    "vpc",
    "vpc_shares",
    "split_rhat",
    "effective_sample_size",
]

_COV_RE = re.compile(r"^cov\[([^\[\],]+),([^\[\],]+)\]\[(\d)\]\[(\d)\]$")
_SIGMA_RE = re.compile(r"^sigma2\[(.+)\]$")


@dataclass(frozen=True)
class SummaryRow:
    name: str
    mean: float
    sd: float
    q2_5: float
    median: float
    q97_5: float
    rhat: float
    ess: float


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]

    def row(self, name: str) -> SummaryRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(f"no summary row {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rows)

    def max_rhat(self) -> float:
        return max(r.rhat for r in self.rows)

    def convergence_warning(self, threshold: float = 1.05) -> bool:
        return any(r.rhat > threshold for r in self.rows)

    def render(self) -> str:
        head = f"{'parameter':<24}{'mean':>12}{'sd':>12}{'2.5%':>12}" \
               f"{'50%':>12}{'97.5%':>12}{'Rhat':>8}{'ESS':>10}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.name:<24}{r.mean:>12.5f}{r.sd:>12.5f}{r.q2_5:>12.5f}"
                f"{r.median:>12.5f}{r.q97_5:>12.5f}{r.rhat:>8.3f}{r.ess:>10.1f}")
        return "\n".join(lines)

    def to_doc(self) -> dict:
        return {
            "parameters": [vars(r) | {} for r in self.rows],
            "max_rhat": self.max_rhat(),
        }


@dataclass(frozen=True)
class VPCRow:
    name: str  # classification name, or "e" for the residual
    mean: float
    q2_5: float
    q97_5: float


@dataclass(frozen=True)
class VPCReport:
    rows: tuple[VPCRow, ...]

    def row(self, name: str) -> VPCRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(f"no VPC component {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rows)

    def render(self) -> str:
        head = f"{'component':<24}{'share':>12}{'2.5%':>12}{'97.5%':>12}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.name:<24}{r.mean:>12.5f}{r.q2_5:>12.5f}"
                         f"{r.q97_5:>12.5f}")
        return "\n".join(lines)

    def to_doc(self) -> dict:
        return {"vpc": [vars(r) | {} for r in self.rows]}


# ---------------------------------------------------------------------------
# Convergence statistics
# ---------------------------------------------------------------------------

def _split_chains(x: np.ndarray) -> np.ndarray:
    m, n = x.shape
    half = n // 2
    return np.concatenate([x[:, :half], x[:, half:2 * half]], axis=0)


def split_rhat(x: np.ndarray) -> float:
    """Gelman-Rubin potential scale reduction on half-chains.

    ``x`` is (chains, draws).  Zero-variance chains report exactly 1.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    halves = _split_chains(x)
    m, n = halves.shape
    if n < 2:
        raise ValueError("need at least 4 draws per chain for split R-hat")
    within = halves.var(axis=1, ddof=1)
    W = float(within.mean())
    B = n * float(halves.mean(axis=1).var(ddof=1)) if m > 1 else 0.0
    if W == 0.0:
        return 1.0 if B == 0.0 else math.inf
    var_plus = (n - 1.0) / n * W + B / n
    return math.sqrt(var_plus / W)


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased (1/n) autocovariance of one chain via FFT."""
    n = x.size
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real
    return acov / n


def effective_sample_size(x: np.ndarray) -> float:
    """ESS with pooled lag correlations and initial-positive-sequence
    truncation; clipped to (0, total draws]."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    if n < 4:
        raise ValueError("need at least 4 draws per chain for ESS")
    total = m * n
    acov = np.asarray([_autocov(x[c]) for c in range(m)])
    mean_var = float(acov[:, 0].mean()) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += float(x.mean(axis=1).var(ddof=1))
    if var_plus == 0.0:
        return float(total)

    # Geyer: accumulate rho_t while consecutive even/odd pairs stay positive
    tau = 1.0
    t = 1
    while t + 1 < n:
        rho_even = 1.0 - (mean_var - float(acov[:, t].mean())) / var_plus
        rho_odd = 1.0 - (mean_var - float(acov[:, t + 1].mean())) / var_plus
        if rho_even + rho_odd <= 0.0:
            break
        tau += 2.0 * (rho_even + rho_odd)
        t += 2
    ess = total / tau
    return float(min(max(ess, 1e-12), total))


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def _pair_names(names) -> list[tuple[str, str]]:
    seen = []
    for name in names:
        m = _COV_RE.match(name)
        if m and (m.group(1), m.group(2)) not in seen:
            seen.append((m.group(1), m.group(2)))
    return seen

def _summary_row(name: str, chains: np.ndarray) -> SummaryRow:
    pooled = chains.reshape(-1)
    q = np.quantile(pooled, [0.025, 0.5, 0.975])
    return SummaryRow(
        name=name,
        mean=float(pooled.mean()),
        sd=float(pooled.std(ddof=1)) if pooled.size > 1 else 0.0,
        q2_5=float(q[0]),
        median=float(q[1]),
        q97_5=float(q[2]),
        rhat=split_rhat(chains),
        ess=effective_sample_size(chains),
    )


def summarize(draws: DrawsMatrix) -> SummaryTable:
    """Mean, sd, central quantiles, split-R-hat and ESS per parameter,
    plus a derived correlation row for every correlated pair."""
    if draws.n_kept < 4:
        raise ValueError("too few draws: need at least 4 per chain")
    rows = [_summary_row(name, draws.parameter(name)) for name in draws.names]
    for a, b in _pair_names(draws.names):
        c00 = draws.parameter(f"cov[{a},{b}][0][0]")
        c01 = draws.parameter(f"cov[{a},{b}][0][1]")
        c11 = draws.parameter(f"cov[{a},{b}][1][1]")
        corr = c01 / np.sqrt(c00 * c11)
        rows.append(_summary_row(f"corr[{a},{b}]", corr))
    return SummaryTable(rows=tuple(rows))


def vpc_shares(draws: DrawsMatrix) -> tuple[tuple[str, ...], np.ndarray]:
    """Per-draw variance shares.

    Returns component names (classifications in draw order, pair members
    as two separate components, residual last as "e") and an
    (total draws, components) array whose rows sum to one.
    """
    names = []
    columns = []
    for name in draws.names:
        m = _SIGMA_RE.match(name)
        if m and m.group(1) != "e":
            names.append(m.group(1))
            columns.append(draws.pooled(name))
        cm = _COV_RE.match(name)
        if cm and cm.group(3) == cm.group(4):
            member = cm.group(1) if cm.group(3) == "0" else cm.group(2)
            names.append(member)
            columns.append(draws.pooled(name))
    if "sigma2[e]" not in draws.names:
        raise ValueError("draws are missing the residual variance sigma2[e]")
    names.append("e")
    columns.append(draws.pooled("sigma2[e]"))
    comp = np.column_stack(columns)
    if np.any(comp < 0):
        raise ValueError("negative variance draw in VPC input")
    shares = comp / comp.sum(axis=1, keepdims=True)
    return tuple(names), shares


def vpc(draws: DrawsMatrix) -> VPCReport:
    """Variance partition coefficients summarized over draws."""
    names, shares = vpc_shares(draws)
    rows = []
    for i, name in enumerate(names):
        col = shares[:, i]
        q = np.quantile(col, [0.025, 0.975])
        rows.append(VPCRow(name=name, mean=float(col.mean()),
                           q2_5=float(q[0]), q97_5=float(q[1])))
    return VPCReport(rows=tuple(rows))
