import numpy as np
import pytest

from crossmlm import DyadError, build_dyad
from test_data import make_dataset


def test_minimal_dyad():
    d = make_dataset(flow=[1.0, 2.0], origin=["A", "B"], dest=["B", "A"])
    frame = build_dyad(d, "origin", "dest")
    assert frame.J == 2
    assert frame.labels == ("A", "B")
    assert list(frame.origin.assign) == [0, 1]
    assert list(frame.dest.assign) == [1, 0]


def test_self_pair_forbidden_reports_row():
    d = make_dataset(flow=[1.0, 2.0], origin=["A", "B"], dest=["B", "B"])
    with pytest.raises(DyadError, match="row 2"):
        build_dyad(d, "origin", "dest", policy="forbid")


def test_self_pair_allowed_by_default():
    d = make_dataset(flow=[1.0], origin=["A"], dest=["A"])
    frame = build_dyad(d, "origin", "dest")
    assert frame.J == 1


def test_destination_only_area_gets_origin_effect():
    d = make_dataset(flow=[1.0, 2.0], origin=["A", "B"], dest=["B", "C"])
    frame = build_dyad(d, "origin", "dest")
    assert frame.labels == ("A", "B", "C")
    # C has an origin cluster even though it never sends a flow
    assert frame.origin.J == 3
    assert "C" not in d.label_column("origin")


def test_shared_universe_first_appearance_order():
    d = make_dataset(flow=[1.0, 2.0, 3.0],
                     origin=["B", "A", "C"], dest=["D", "B", "A"])
    frame = build_dyad(d, "origin", "dest")
    # row-wise scan: B, D, A, (B), C, (A)
    assert frame.labels == ("B", "D", "A", "C")
    assert frame.origin.labels == frame.dest.labels


def test_maps_share_counts():
    rng = np.random.default_rng(21)
    areas = [f"u{i}" for i in range(6)]
    o = [areas[i] for i in rng.integers(0, 6, size=40)]
    de = [areas[i] for i in rng.integers(0, 6, size=40)]
    d = make_dataset(flow=np.arange(40.0), origin=o, dest=de)
    frame = build_dyad(d, "origin", "dest")
    assert frame.origin.J == frame.dest.J
    assert frame.origin.labels == frame.dest.labels
