"""Exact nearest-neighbour search and bidirectional point correspondences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels, num_threads
from .errors import EmptyInput


def _as_points(cloud, what):
    pts = np.asarray(cloud, dtype=float)
    if pts.size == 0:
        raise EmptyInput(f"{what} is empty")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{what} must have shape (n, 3), got {pts.shape}")
    return pts


class SpatialIndex:
    """Immutable exact nearest-neighbour index over a point set.

    Equal-distance ties resolve to the lowest point index.
    """

    def __init__(self, points):
        self.points = _as_points(points, "index points")
        self._tree = kernels.KDTree(self.points)

    def __len__(self):
        return len(self.points)

    def query(self, queries):
        """Return ``(indices, squared_distances)`` of the nearest indexed point."""
        q = np.asarray(queries, dtype=float).reshape(-1, 3)
        return self._tree.query(q, num_threads())


def build_index(points):
    return SpatialIndex(points)


@dataclass(frozen=True)
class CorrespondenceMap:
    """Nearest-neighbour pairing between an output cloud and input vertices."""

    out_to_in: np.ndarray
    in_to_out: np.ndarray
    out_sqdist: np.ndarray = None
    in_sqdist: np.ndarray = None


def correspondences(output, input_vertices, input_index=None):
    """Exact nearest neighbours in both directions.

    ``input_index`` may be passed to reuse a prebuilt index over
    ``input_vertices`` (the optimizer keeps one for the whole fit).
    """
    out = _as_points(output, "output cloud")
    inp = _as_points(input_vertices, "input vertices")
    if input_index is None:
        input_index = SpatialIndex(inp)
    o2i, od = input_index.query(out)
    i2o, idist = SpatialIndex(out).query(inp)
    return CorrespondenceMap(o2i, i2o, od, idist)
