"""Synthetic data generation from fully specified cross-classified models.

This is the verification engine: every recovery, misspecification, and
identifiability study draws its data here.  Four assignment schemes cover
the structures of interest:

  full-cross-balanced   every cell of the full cross-classification holds
                        ``cell_size`` observations
  random-assignment     each observation draws its cluster independently
                        and uniformly in every classification (partial
                        crossing with naturally unbalanced cells)
  panel-one-per-cell    exactly one observation per cell of a two-way
                        cross (a balanced state-by-year panel)
  dyadic-all-pairs      one observation per ordered pair of distinct
                        units, with correlated origin/destination effects

The response is assembled exactly from the model: fixed part, one normal
effect per cluster of each classification, an optional cell-interaction
effect over the first two classifications, optional correlated pair
effects, and the residual.  Everything is deterministic in the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

__all__ = ["SimError", "PairTruth", "SimDesign", "simulate", "drop_cells",
           "read_design", "design_to_doc"]

FULL_CROSS = "full-cross-balanced"
RANDOM_ASSIGNMENT = "random-assignment"
PANEL = "panel-one-per-cell"
DYADIC = "dyadic-all-pairs"

_SCHEMES = (FULL_CROSS, RANDOM_ASSIGNMENT, PANEL, DYADIC)


class SimError(ValueError):
    """Inconsistent simulation design."""


@dataclass(frozen=True)
class PairTruth:
    """True correlated-pair parameters for the dyadic scheme."""

    var_origin: float
    var_dest: float
    correlation: float

    def covariance(self) -> np.ndarray:
        off = self.correlation * math.sqrt(self.var_origin * self.var_dest)
        return np.array([[self.var_origin, off], [off, self.var_dest]])


@dataclass(frozen=True)
class SimDesign:
    """Cluster counts, assignment scheme, and true parameters.

    ``beta[0]`` is the intercept; each further coefficient brings one
    standard-normal covariate named x1, x2, ...  ``sigma2`` maps each
    classification name to its true variance.  ``sigma2_int`` adds a
    random effect per occupied cell of the first two classifications.
    """

    scheme: str
    classifications: tuple = ()  # (name, cluster count) pairs
    beta: tuple = (0.0,)
    sigma2: dict = field(default_factory=dict)
    sigma2_e: float = 1.0
    sigma2_int: float | None = None
    pair: PairTruth | None = None
    n: int | None = None  # random-assignment only
    cell_size: int = 1  # full-cross-balanced only
    origin_col: str = "origin"
    dest_col: str = "dest"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classifications",
                           tuple((str(n), int(j)) for n, j in self.classifications))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.scheme not in _SCHEMES:
            raise SimError(f"unknown scheme {self.scheme!r}")
        if not self.classifications:
            raise SimError("at least one classification required")
        if any(j < 1 for _, j in self.classifications):
            raise SimError("cluster counts must be positive")
        if len({n for n, _ in self.classifications}) != len(self.classifications):
            raise SimError("classification names must be distinct")
        if not self.beta:
            raise SimError("beta must include at least the intercept")
        if self.sigma2_e < 0:
            raise SimError("residual variance must be nonnegative")
        if self.scheme == DYADIC:
            if len(self.classifications) != 1:
                raise SimError("dyadic scheme takes exactly one unit set")
            if self.pair is None:
                raise SimError("dyadic scheme requires pair truth")
            if self.classifications[0][1] < 2:
                raise SimError("dyadic scheme needs at least two units")
            if abs(self.pair.correlation) > 1:
                raise SimError("pair correlation must lie in [-1, 1]")
            if self.pair.var_origin < 0 or self.pair.var_dest < 0:
                raise SimError("pair variances must be nonnegative")
        else:
            if self.pair is not None:
                raise SimError("pair truth only applies to the dyadic scheme")
            missing = [n for n, _ in self.classifications if n not in self.sigma2]
            if missing:
                raise SimError(f"missing true variance for {missing}")
            if any(v < 0 for v in self.sigma2.values()):
                raise SimError("true variances must be nonnegative")
        if self.scheme == RANDOM_ASSIGNMENT:
            if self.n is None or self.n < 1:
                raise SimError("random-assignment requires n >= 1")
        if self.scheme == PANEL and len(self.classifications) != 2:
            raise SimError("panel scheme takes exactly two classifications")
        if self.scheme == FULL_CROSS and self.cell_size < 1:
            raise SimError("cell_size must be positive")
        if self.sigma2_int is not None:
            if self.sigma2_int < 0:
                raise SimError("interaction variance must be nonnegative")
            if len(self.classifications) < 2:
                raise SimError("interaction effect needs two classifications")

    @property
    def n_obs(self) -> int:
        sizes = [j for _, j in self.classifications]
        if self.scheme == FULL_CROSS:
            return int(np.prod(sizes)) * self.cell_size
        if self.scheme == PANEL:
            return sizes[0] * sizes[1]
        if self.scheme == DYADIC:
            return sizes[0] * (sizes[0] - 1)
        return int(self.n)


def _assignments(sd: SimDesign, rng) -> list[np.ndarray]:
    sizes = [j for _, j in sd.classifications]
    if sd.scheme == RANDOM_ASSIGNMENT:
        return [rng.integers(0, j, size=sd.n) for j in sizes]
    if sd.scheme in (FULL_CROSS, PANEL):
        reps = sd.cell_size if sd.scheme == FULL_CROSS else 1
        grids = np.meshgrid(*(np.arange(j) for j in sizes), indexing="ij")
        return [np.repeat(g.reshape(-1), reps) for g in grids]
    # dyadic: ordered pairs of distinct units
    A = sizes[0]
    o, d = np.meshgrid(np.arange(A), np.arange(A), indexing="ij")
    keep = o.reshape(-1) != d.reshape(-1)
    return [o.reshape(-1)[keep], d.reshape(-1)[keep]]


def simulate(sd: SimDesign) -> Dataset:
    """Generate one dataset; bit-deterministic in the design seed."""
    rng = np.random.default_rng(sd.seed)
    assigns = _assignments(sd, rng)
    n = len(assigns[0])

    ncov = len(sd.beta) - 1
    covariates = rng.standard_normal((n, ncov)) if ncov else np.empty((n, 0))
    y = np.full(n, sd.beta[0]) + covariates @ np.asarray(sd.beta[1:])

    if sd.scheme == DYADIC:
        A = sd.classifications[0][1]
        # eigh-based square root tolerates semidefinite truth (corr = +-1)
        w, Q = np.linalg.eigh(sd.pair.covariance())
        L = Q * np.sqrt(np.clip(w, 0.0, None))
        effects = rng.standard_normal((A, 2)) @ L.T
        y += effects[assigns[0], 0] + effects[assigns[1], 1]
    else:
        for (name, J), assign in zip(sd.classifications, assigns):
            u = rng.normal(0.0, math.sqrt(sd.sigma2[name]), size=J)
            y += u[assign]
        if sd.sigma2_int is not None:
            Ja, Jb = sd.classifications[0][1], sd.classifications[1][1]
            eff = rng.normal(0.0, math.sqrt(sd.sigma2_int), size=Ja * Jb)
            y += eff[assigns[0] * Jb + assigns[1]]

    y += rng.normal(0.0, math.sqrt(sd.sigma2_e), size=n)

    columns: dict[str, np.ndarray] = {"y": y}
    for i in range(ncov):
        columns[f"x{i + 1}"] = covariates[:, i]
    if sd.scheme == DYADIC:
        name = sd.classifications[0][0]
        labels = np.asarray([f"{name}{i + 1}" for i in range(sd.classifications[0][1])],
                            dtype=object)
        columns[sd.origin_col] = labels[assigns[0]]
        columns[sd.dest_col] = labels[assigns[1]]
    else:
        for (name, J), assign in zip(sd.classifications, assigns):
            labels = np.asarray([f"{name}{i + 1}" for i in range(J)], dtype=object)
            columns[name] = labels[assign]
    numeric = ("y",) + tuple(f"x{i + 1}" for i in range(ncov))
    return Dataset(columns=columns, numeric=numeric)


def drop_cells(d: Dataset, fraction: float, seed: int, columns=None) -> Dataset:
    """Remove all observations in a uniform random fraction of occupied cells.

    Cells are the joint label combinations of ``columns`` (default: every
    categorical column).  ``floor(fraction * cells)`` cells are dropped,
    which for fraction < 1 always leaves at least one cell; clusters
    emptied by the drop simply disappear on re-encoding.
    """
    if not (0.0 <= fraction < 1.0):
        raise SimError("fraction must lie in [0, 1)")
    if columns is None:
        columns = d.categorical
    columns = list(columns)
    if not columns:
        raise SimError("no label columns to form cells")
    keys = [tuple(d.label_column(c)[i] for c in columns) for i in range(d.n)]
    cells: dict[tuple, int] = {}
    cell_of = np.empty(d.n, dtype=np.int64)
    for i, key in enumerate(keys):
        cell_of[i] = cells.setdefault(key, len(cells))
    n_cells = len(cells)
    k = int(fraction * n_cells)
    if k == 0:
        return d.take(np.arange(d.n))
    rng = np.random.default_rng(seed)
    dropped = rng.choice(n_cells, size=k, replace=False)
    keep_cell = np.ones(n_cells, dtype=bool)
    keep_cell[dropped] = False
    return d.take(np.flatnonzero(keep_cell[cell_of]))


# ---------------------------------------------------------------------------
# Design documents (key/value trees for the CLI)
# ---------------------------------------------------------------------------

def design_to_doc(sd: SimDesign) -> dict:
    doc = {
        "scheme": sd.scheme,
        "classifications": [{"name": n, "clusters": j}
                            for n, j in sd.classifications],
        "beta": list(sd.beta),
        "sigma2_e": sd.sigma2_e,
        "seed": sd.seed,
    }
    if sd.scheme == DYADIC:
        doc["pair"] = {
            "var_origin": sd.pair.var_origin,
            "var_dest": sd.pair.var_dest,
            "correlation": sd.pair.correlation,
        }
        doc["origin_col"] = sd.origin_col
        doc["dest_col"] = sd.dest_col
    else:
        doc["sigma2"] = dict(sd.sigma2)
    if sd.sigma2_int is not None:
        doc["sigma2_int"] = sd.sigma2_int
    if sd.scheme == RANDOM_ASSIGNMENT:
        doc["n"] = sd.n
    if sd.scheme == FULL_CROSS:
        doc["cell_size"] = sd.cell_size
    return doc


def read_design(path) -> SimDesign:
    """Read a simulation design from a JSON key/value document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SimError(f"invalid design document {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise SimError("design document must be a key/value tree")
    try:
        classifications = tuple((c["name"], c["clusters"])
                                for c in doc["classifications"])
    except (KeyError, TypeError) as exc:
        raise SimError(f"malformed classifications entry: {exc}") from None
    pair = None
    if "pair" in doc:
        p = doc["pair"]
        pair = PairTruth(var_origin=p["var_origin"], var_dest=p["var_dest"],
                         correlation=p["correlation"])
    try:
        return SimDesign(
            scheme=doc["scheme"],
            classifications=classifications,
            beta=tuple(doc.get("beta", (0.0,))),
            sigma2=dict(doc.get("sigma2", {})),
            sigma2_e=float(doc.get("sigma2_e", 1.0)),
            sigma2_int=doc.get("sigma2_int"),
            pair=pair,
            n=doc.get("n"),
            cell_size=int(doc.get("cell_size", 1)),
            origin_col=doc.get("origin_col", "origin"),
            dest_col=doc.get("dest_col", "dest"),
            seed=int(doc.get("seed", 0)),
        )
    except KeyError as exc:
        raise SimError(f"design document missing field {exc}") from None
