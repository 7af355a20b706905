"""Origin/destination (dyadic) data wired into correlated-pair machinery.

Directed flows between units of one set carry two random effects per unit:
one for its role as origin, one as destination, and the two are allowed to
correlate.  Both classifications are therefore encoded against a single
shared label universe — a unit appearing only as a destination still gets
an origin effect, identified through the prior and the 2x2 covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClassificationMap, DataError, Dataset

__all__ = ["DyadError", "DyadFrame", "build_dyad"]

FORBID = "forbid"
ALLOW = "allow"


class DyadError(ValueError):
    """Invalid dyadic structure."""


@dataclass(frozen=True)
class DyadFrame:
    """Origin and destination classification maps over one label universe."""

    origin: ClassificationMap
    dest: ClassificationMap
    self_pair_policy: str = ALLOW

    def __post_init__(self):
        if self.self_pair_policy not in (FORBID, ALLOW):
            raise DyadError(
                f"unknown self-pair policy {self.self_pair_policy!r}")
        if self.origin.labels != self.dest.labels:
            raise DyadError("origin and dest label universes differ")
        if self.origin.n != self.dest.n:
            raise DyadError("origin and dest lengths differ")

    @property
    def J(self) -> int:
        return self.origin.J

    @property
    def labels(self) -> tuple[str, ...]:
        return self.origin.labels


def build_dyad(d: Dataset, origin_col: str, dest_col: str,
               policy: str = ALLOW) -> DyadFrame:
    """Encode two label columns against their shared label universe.

    The universe is the union of both columns' labels in first-appearance
    order scanning origin and destination values row by row.  Under the
    ``forbid`` policy a row whose origin equals its destination is an
    error naming the row.
    """
    if policy not in (FORBID, ALLOW):
        raise DyadError(f"unknown self-pair policy {policy!r}")
    o_labels = d.label_column(origin_col)
    d_labels = d.label_column(dest_col)

    index: dict[str, int] = {}
    for i in range(len(o_labels)):
        for lab in (o_labels[i], d_labels[i]):
            if lab not in index:
                index[lab] = len(index)
    universe = tuple(index.keys())

    o_assign = np.fromiter((index[v] for v in o_labels), dtype=np.int64,
                           count=len(o_labels))
    d_assign = np.fromiter((index[v] for v in d_labels), dtype=np.int64,
                           count=len(d_labels))
    if policy == FORBID:
        same = np.flatnonzero(o_assign == d_assign)
        if same.size:
            row = int(same[0])
            raise DyadError(
                f"self-pair {o_labels[row]!r} -> {d_labels[row]!r} at row "
                f"{row + 1} (policy forbids)")

    # A label seen only as destination leaves its origin cluster unobserved;
    # that is intentional and identified through the pair covariance.
    origin = ClassificationMap(name=origin_col, assign=o_assign, labels=universe)
    dest = ClassificationMap(name=dest_col, assign=d_assign, labels=universe)
    return DyadFrame(origin=origin, dest=dest, self_pair_policy=policy)
