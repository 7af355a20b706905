"""Fitting-ready model representation.

Random-intercept designs are kept as index vectors, never as materialized
indicator matrices: each observation selects exactly one cluster of each
classification with coefficient one, which makes both the Gibbs updates
and the interaction bookkeeping linear in n.  An interaction classification
has one cluster per *occupied* cell of its parents' cross-classification;
empty cells contribute nothing.  When every occupied cell of the parents
holds a single observation the interaction variance cannot be separated
from the residual variance, so the build records a warning instead of
refusing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ClassificationMap, DataError, Dataset, _pair_structure
from .dyadic import build_dyad
from .formula import CORRELATED_PAIR, INTERACTION, SIMPLE, ModelFormula

__all__ = ["DesignError", "DesignSet", "build_design", "interaction_map"]


class DesignError(ValueError):
    """Formula and data cannot be assembled into a design."""


@dataclass
class DesignSet:
    """Everything the estimators need: fixed-effect matrix, classification
    index vectors, correlated-pair groupings, and identifiability warnings.

    ``pairs`` holds index pairs into ``classifications``; the two members of
    a pair share one label universe and their effects covary.
    """

    n: int
    X: np.ndarray  # (n, p); column 0 is all ones when intercept present
    fixed_names: tuple[str, ...]
    classifications: tuple[ClassificationMap, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.n:
            raise DesignError(f"X must be ({self.n}, p)")
        if self.X.shape[1] != len(self.fixed_names):
            raise DesignError("fixed_names length must match X columns")
        for c in self.classifications:
            if c.n != self.n:
                raise DesignError(
                    f"classification {c.name!r} length {c.n} != n {self.n}")
        used = set()
        for ka, kd in self.pairs:
            if ka == kd:
                raise DesignError("a correlated pair needs two distinct classifications")
            a, b = self.classifications[ka], self.classifications[kd]
            if a.labels != b.labels:
                raise DesignError(
                    f"correlated pair ({a.name}, {b.name}): label sets differ")
            if used & {ka, kd}:
                raise DesignError("classification reused across correlated pairs")
            used |= {ka, kd}

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def pair_members(self) -> frozenset[int]:
        return frozenset(k for pair in self.pairs for k in pair)

    @property
    def nonpair_indices(self) -> tuple[int, ...]:
        members = self.pair_members
        return tuple(k for k in range(len(self.classifications))
                     if k not in members)


def interaction_map(a: ClassificationMap, b: ClassificationMap) -> ClassificationMap:
    """Derived classification over the occupied (a, b) cells.

    One cluster per occupied cell, indexed by first appearance; labels are
    ``aLabel:bLabel``.  Aliased parents simply collapse onto the shared
    partition.
    """
    if a.n != b.n:
        raise DataError(
            f"interaction {a.name}:{b.name}: lengths differ ({a.n} vs {b.n})")
    joint = a.assign.astype(np.int64) * b.J + b.assign
    cell_index: dict[int, int] = {}
    assign = np.empty(a.n, dtype=np.int64)
    labels = []
    for i, cell in enumerate(joint.tolist()):
        code = cell_index.get(cell)
        if code is None:
            code = len(cell_index)
            cell_index[cell] = code
            labels.append(f"{a.labels[cell // b.J]}:{b.labels[cell % b.J]}")
        assign[i] = code
    return ClassificationMap(name=f"{a.name}:{b.name}", assign=assign,
                             labels=tuple(labels))


def build_design(f: ModelFormula, d: Dataset) -> DesignSet:
    """Assemble the design for a formula against a dataset.

    The fixed-effect matrix is built in formula order with the intercept
    first; each simple term becomes its classification map, each
    interaction a derived occupied-cell map, and each corr(a, b) a pair of
    maps re-encoded on their shared label universe.
    """
    from .data import encode_classification

    for name in (f.response, *f.fixed_terms):
        if name not in d.columns:
            raise DesignError(f"missing column {name!r}")
        if name not in d.numeric:
            raise DesignError(f"column {name!r} must be numeric")

    cols = [np.ones(d.n)] if f.intercept else []
    names = ["intercept"] if f.intercept else []
    for term in f.fixed_terms:
        cols.append(d.numeric_column(term))
        names.append(term)
    X = np.column_stack(cols) if cols else np.empty((d.n, 0))

    classifications: list[ClassificationMap] = []
    pairs: list[tuple[int, int]] = []
    warnings: list[str] = []
    encoded: dict[str, ClassificationMap] = {}

    def base_map(col: str) -> ClassificationMap:
        if col not in encoded:
            if col not in d.columns:
                raise DesignError(f"missing column {col!r}")
            if col in d.numeric:
                raise DesignError(
                    f"column {col!r} is numeric; classifications must be label columns")
            encoded[col] = encode_classification(d, col)
        return encoded[col]

    for term in f.random_terms:
        if term.kind == SIMPLE:
            classifications.append(base_map(term.columns[0]))
        elif term.kind == INTERACTION:
            a, b = (base_map(c) for c in term.columns)
            rel = _pair_structure(a, b)
            if rel.a_nested_in_b and rel.b_nested_in_a:
                raise DesignError(
                    f"interaction {a.name}:{b.name}: parents are aliased")
            derived = interaction_map(a, b)
            if rel.max_occupancy == 1:
                warnings.append(
                    f"{derived.name}: one observation per occupied cell; "
                    "interaction confounded with residual")
            classifications.append(derived)
        else:  # correlated pair
            dyad = build_dyad(d, term.columns[0], term.columns[1])
            k = len(classifications)
            classifications.append(dyad.origin)
            classifications.append(dyad.dest)
            pairs.append((k, k + 1))

    return DesignSet(
        n=d.n,
        X=X,
        fixed_names=tuple(names),
        classifications=tuple(classifications),
        pairs=tuple(pairs),
        warnings=tuple(warnings),
    )
