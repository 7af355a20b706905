"""Tabular data, classification maps, and relational-structure diagnosis.

A classification is a grouping factor (school, neighbourhood, ...) whose
clusters receive random intercepts.  ``encode_classification`` turns a
label column into the classification function in computable form: an
observation-indexed vector of cluster indices.  ``analyze_structure``
diagnoses how classifications relate to each other — exact nesting,
crossing, or aliasing — together with cell occupancy of each pairwise
cross-classification, which drives interaction-identifiability advisories
(one observation per cell means a random interaction cannot be separated
from the residual).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "ClassificationMap",
    "PairStructure",
    "StructureReport",
    "read_table",
    "write_table",
    "encode_classification",
    "analyze_structure",
]

NESTED_IN = "nested-in"
CROSSED = "crossed"
ALIASED = "aliased"


class DataError(ValueError):
    """Ingestion or data-validation failure."""


@dataclass
class Dataset:
    """Immutable column table: numeric vectors and label (cluster) columns.

    ``columns`` preserves file/construction order; ``numeric`` lists the
    names parsed as reals, everything else is categorical labels.
    """

    columns: dict[str, np.ndarray]
    numeric: tuple[str, ...]

    def __post_init__(self):
        if not self.columns:
            raise DataError("dataset has no columns")
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) != 1:
            raise DataError(f"columns differ in length: {sorted(lengths)}")
        n = lengths.pop()
        if n < 1:
            raise DataError("dataset has no rows")
        self.numeric = tuple(self.numeric)
        cols = {}
        for name, values in self.columns.items():
            if name in self.numeric:
                arr = np.asarray(values, dtype=float)
                if not np.all(np.isfinite(arr)):
                    bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                    raise DataError(
                        f"non-finite value in numeric column {name!r} at row {bad + 1}")
            else:
                arr = np.asarray([str(v) for v in values], dtype=object)
            arr.flags.writeable = False
            cols[name] = arr
        for name in self.numeric:
            if name not in cols:
                raise DataError(f"missing column {name!r}")
        self.columns = cols

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def categorical(self) -> tuple[str, ...]:
        return tuple(c for c in self.columns if c not in self.numeric)

    def numeric_column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(f"missing column {name!r}")
        if name not in self.numeric:
            raise DataError(f"column {name!r} is categorical, expected numeric")
        return self.columns[name]

    def label_column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(f"missing column {name!r}")
        if name in self.numeric:
            raise DataError(f"column {name!r} is numeric, expected categorical")
        return self.columns[name]

    def take(self, rows: np.ndarray) -> "Dataset":
        """Row subset in the given order (used by cell dropping)."""
        return Dataset(
            columns={k: v[rows] for k, v in self.columns.items()},
            numeric=self.numeric,
        )


@dataclass(frozen=True, eq=False)
class ClassificationMap:
    """The classification function of one grouping factor.

    ``assign[i]`` is the cluster index of observation i; indices run over
    [0, J) in first-appearance order of the labels.  Maps produced by
    ``encode_classification`` never contain empty clusters; shared-universe
    dyadic maps may leave a cluster unobserved in one role.
    """

    name: str
    assign: np.ndarray  # (n,) int64
    labels: tuple[str, ...]

    def __eq__(self, other):
        if not isinstance(other, ClassificationMap):
            return NotImplemented
        return (self.name == other.name and self.labels == other.labels
                and np.array_equal(self.assign, other.assign))

    def __post_init__(self):
        assign = np.asarray(self.assign, dtype=np.int64)
        assign.flags.writeable = False
        object.__setattr__(self, "assign", assign)
        object.__setattr__(self, "labels", tuple(self.labels))
        if assign.ndim != 1 or assign.size == 0:
            raise DataError(f"classification {self.name!r}: empty assignment")
        J = len(self.labels)
        if J == 0 or assign.min() < 0 or assign.max() >= J:
            raise DataError(
                f"classification {self.name!r}: cluster index out of range")

    @property
    def n(self) -> int:
        return int(self.assign.size)

    @property
    def J(self) -> int:
        return len(self.labels)

    def counts(self) -> np.ndarray:
        return np.bincount(self.assign, minlength=self.J)


@dataclass(frozen=True)
class PairStructure:
    """Relational facts for one pair of classifications (a, b)."""

    a: str
    b: str
    a_nested_in_b: bool
    b_nested_in_a: bool
    occupied_cells: int
    max_occupancy: int
    empty_cells: int  # relative to J_a * J_b

    @property
    def relation(self) -> str:
        """Relation of the ordered pair (a, b)."""
        if self.a_nested_in_b and self.b_nested_in_a:
            return ALIASED
        if self.a_nested_in_b:
            return NESTED_IN
        return CROSSED

    def describe(self) -> str:
        """One human-readable line, symmetric in content."""
        if self.a_nested_in_b and self.b_nested_in_a:
            head = f"{self.a} aliased-with {self.b}"
        elif self.a_nested_in_b:
            head = f"{self.a} nested-in {self.b}"
        elif self.b_nested_in_a:
            head = f"{self.b} nested-in {self.a}"
        else:
            head = f"{self.a} crossed-with {self.b}"
        total = self.occupied_cells + self.empty_cells
        line = (f"{head}; {self.occupied_cells}/{total} cells occupied; "
                f"max occupancy {self.max_occupancy}; "
                f"{self.empty_cells} empty")
        if self.max_occupancy == 1:
            line += "; advisory: interaction not identifiable"
        return line


@dataclass(frozen=True)
class StructureReport:
    """Pairwise relations and cell occupancy among classifications."""

    names: tuple[str, ...]
    pairs: tuple[PairStructure, ...]

    def pair(self, a: str, b: str) -> PairStructure:
        for p in self.pairs:
            if (p.a, p.b) == (a, b):
                return p
            if (p.a, p.b) == (b, a):
                return PairStructure(
                    a=b, b=a,
                    a_nested_in_b=p.b_nested_in_a,
                    b_nested_in_a=p.a_nested_in_b,
                    occupied_cells=p.occupied_cells,
                    max_occupancy=p.max_occupancy,
                    empty_cells=p.empty_cells,
                )
        raise KeyError(f"no pair ({a}, {b}) in report")

    def relation(self, a: str, b: str) -> str:
        return self.pair(a, b).relation

    def describe(self) -> list[str]:
        if not self.pairs:
            return [f"single classification {self.names[0]!r}: no pairs to relate"]
        return [p.describe() for p in self.pairs]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def read_table(path, numeric=()) -> Dataset:
    """Read a comma-delimited UTF-8 text file with a header row.

    ``numeric`` names the columns to parse as reals; all other columns are
    kept as cluster labels.  Missing values are rejected outright — an
    empty cell or an unparseable/non-finite numeric cell is an error
    naming the row and column.
    """
    numeric = tuple(numeric)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"duplicate column names in header of {path}")
        rows = list(reader)
    rows = [r for r in rows if r]  # ignore trailing blank lines
    if not rows:
        raise DataError(f"empty file: {path} (header only)")
    for name in numeric:
        if name not in header:
            raise DataError(f"missing column {name!r} in {path}")

    raw = {name: [] for name in header}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"row {i + 1} has {len(row)} fields, expected {len(header)}")
        for name, cell in zip(header, row):
            raw[name].append(cell.strip())

    columns: dict[str, np.ndarray] = {}
    for name in header:
        cells = raw[name]
        if name in numeric:
            values = np.empty(len(cells))
            for i, cell in enumerate(cells):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"cannot parse numeric value {cell!r} at row {i + 1}, "
                        f"column {name!r}") from None
                if not math.isfinite(v):
                    raise DataError(
                        f"non-finite numeric value {cell!r} at row {i + 1}, "
                        f"column {name!r}")
                values[i] = v
            columns[name] = values
        else:
            for i, cell in enumerate(cells):
                if cell == "":
                    raise DataError(
                        f"missing value at row {i + 1}, column {name!r}")
            columns[name] = np.asarray(cells, dtype=object)
    return Dataset(columns=columns, numeric=numeric)


def write_table(d: Dataset, path) -> None:
    """Write a dataset in the same delimited format ``read_table`` consumes."""
    names = list(d.columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(d.n):
            writer.writerow([
                repr(float(d.columns[c][i])) if c in d.numeric else d.columns[c][i]
                for c in names
            ])


# ---------------------------------------------------------------------------
# Classification encoding and structure analysis
# ---------------------------------------------------------------------------

def encode_classification(d: Dataset, column: str) -> ClassificationMap:
    """Encode a label column as a classification map.

    Cluster indices are assigned by first appearance, which is stable
    across re-encoding and independent of label collation.
    """
    labels = d.label_column(column)
    index: dict[str, int] = {}
    assign = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        code = index.get(lab)
        if code is None:
            code = len(index)
            index[lab] = code
        assign[i] = code
    # by construction J = distinct label count and no cluster is empty
    return ClassificationMap(name=column, assign=assign,
                             labels=tuple(index.keys()))


def _pair_structure(a: ClassificationMap, b: ClassificationMap) -> PairStructure:
    joint = a.assign.astype(np.int64) * b.J + b.assign
    cells, counts = np.unique(joint, return_counts=True)
    occupied = int(cells.size)
    return PairStructure(
        a=a.name,
        b=b.name,
        # one occupied cell per cluster <=> each cluster meets exactly one
        # partner cluster
        a_nested_in_b=occupied == a.J,
        b_nested_in_a=occupied == b.J,
        occupied_cells=occupied,
        max_occupancy=int(counts.max()),
        empty_cells=a.J * b.J - occupied,
    )


def analyze_structure(maps) -> StructureReport:
    """Diagnose pairwise relations among classification maps.

    A nested-in B holds exactly when every A-cluster co-occurs with one
    and only one B-cluster; mutual nesting is aliasing; anything else is
    crossed.  Cell statistics are computed over the joint (A, B) index
    pairs.
    """
    maps = list(maps)
    if not maps:
        raise DataError("no classifications to analyze")
    n = maps[0].n
    for m in maps:
        if m.n != n:
            raise DataError(
                f"classification {m.name!r} has length {m.n}, expected {n}")
    names = [m.name for m in maps]
    if len(set(names)) != len(names):
        raise DataError("classification names must be distinct")
    pairs = []
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            pairs.append(_pair_structure(maps[i], maps[j]))
    return StructureReport(names=tuple(names), pairs=tuple(pairs))
