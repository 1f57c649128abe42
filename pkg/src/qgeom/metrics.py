"""Reconstruction metrics: scaled Chamfer distance and a sampled Metro-style distance.

Reporting follows the usual table convention: Chamfer distance times 1e3,
Metro distances times 10.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from ._backend import kernels, num_threads
from .errors import DegenerateGeometry, EmptyInput
from .losses import chamfer_loss
from .mesh_core import sample_surface

CD_SCALE = 1e3
METRO_SCALE = 10.0
DEFAULT_METRO_SAMPLES = 100_000
TABLE_COLUMNS = ("loss", "models", "cd_median", "cd_max", "metro_median", "metro_max")


def eval_cd(output, input_vertices):
    """Chamfer distance between two clouds, scaled by 1e3."""
    out = np.asarray(output, dtype=float)
    inp = np.asarray(input_vertices, dtype=float)
    if out.size == 0 or inp.size == 0:
        raise EmptyInput("Chamfer distance needs two non-empty clouds")
    return chamfer_loss(out, inp).scalar * CD_SCALE


class TriangleIndex:
    """Exact nearest-triangle queries over the non-degenerate faces of a mesh."""

    def __init__(self, mesh):
        keep = np.flatnonzero(~mesh.degenerate_faces)
        if len(keep) == 0:
            raise DegenerateGeometry("mesh has no non-degenerate faces")
        self.face_ids = keep
        self._bvh = kernels.TriangleBVH(mesh.vertices, mesh.faces[keep])

    def query(self, points):
        """Return ``(distances, face_ids, closest_points)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        sqd, local, closest = self._bvh.query(pts, num_threads())
        return np.sqrt(sqd), self.face_ids[local], closest


def point_to_mesh_distances(points, mesh):
    return TriangleIndex(mesh).query(points)[0]


class MetroResult(NamedTuple):
    max: float
    median: float


def _subsample(points, samples, seed):
    if len(points) <= samples:
        return points
    rng = np.random.default_rng(seed)
    return points[np.sort(rng.choice(len(points), samples, replace=False))]


def eval_metro(output_surface_samples, input_mesh, samples=DEFAULT_METRO_SAMPLES, seed=42,
               scale=METRO_SCALE):
    """Point-to-surface Metro variant: distances from samples to the nearest triangle.

    At most ``samples`` points are used (a seeded subset when the cloud is
    larger). Returns max and median distance multiplied by ``scale``.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    pts = np.asarray(output_surface_samples, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyInput("no sample points")
    dist = point_to_mesh_distances(_subsample(pts, samples, seed), input_mesh)
    return MetroResult(float(dist.max()) * scale, float(np.median(dist)) * scale)


def eval_metro_meshes(mesh_a, mesh_b, samples=DEFAULT_METRO_SAMPLES, seed=42,
                      bidirectional=True, scale=METRO_SCALE):
    """Sampled mesh-to-mesh distance; symmetric when ``bidirectional``."""
    dist = point_to_mesh_distances(sample_surface(mesh_a, samples, seed), mesh_b)
    if bidirectional:
        back = point_to_mesh_distances(sample_surface(mesh_b, samples, seed + 1), mesh_a)
        dist = np.concatenate([dist, back])
    return MetroResult(float(dist.max()) * scale, float(np.median(dist)) * scale)


@dataclass(frozen=True)
class EvalReport:
    cd_times_1e3: float
    metro_max_times_10: float
    metro_median_times_10: float
    sample_count: int
    seed: int
    metro_variant: str = "point-to-surface"

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate(output, mesh, samples=DEFAULT_METRO_SAMPLES, seed=42):
    """CD against the mesh vertices plus the point-to-surface Metro variant."""
    pts = np.asarray(output, dtype=float).reshape(-1, 3)
    cd = eval_cd(pts, mesh.vertices)
    metro = eval_metro(pts, mesh, samples, seed)
    return EvalReport(cd, metro.max, metro.median, min(samples, len(pts)), seed)


def table_row(reports, loss=""):
    """Aggregate per-model reports into one results-table row.

    Each model contributes one CD value and one Metro value (its max
    distance); the row holds the median and max of those across models.
    """
    if not reports:
        raise EmptyInput("no reports to aggregate")
    cd = np.array([r.cd_times_1e3 for r in reports])
    metro = np.array([r.metro_max_times_10 for r in reports])
    return {"loss": loss, "models": len(reports),
            "cd_median": float(np.median(cd)), "cd_max": float(cd.max()),
            "metro_median": float(np.median(metro)), "metro_max": float(metro.max())}


def table_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def sharp_edges(mesh, angle_deg=30.0):
    """Segments ``(k, 2, 3)`` of edges whose dihedral angle exceeds ``angle_deg``.

    Boundary and non-manifold edges are always included.
    """
    f = mesh.faces
    normals = mesh.face_planes[:, :3]
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    owner = np.tile(np.arange(len(f)), 3)
    e.sort(axis=1)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    uniq, start, counts = np.unique(e, axis=0, return_index=True, return_counts=True)
    cos_limit = np.cos(np.radians(angle_deg))
    keep = counts != 2
    pair = counts == 2
    n0 = normals[owner[start[pair]]]
    n1 = normals[owner[start[pair] + 1]]
    keep[pair] = (n0 * n1).sum(axis=1) < cos_limit
    return mesh.vertices[uniq[keep]]


def distance_to_segments(points, segments):
    p = np.asarray(points, dtype=float)[:, None, :]
    a = segments[None, :, 0]
    d = segments[None, :, 1] - a
    t = np.clip(((p - a) * d).sum(-1) / np.maximum((d * d).sum(-1), 1e-300), 0.0, 1.0)
    diff = p - (a + t[..., None] * d)
    return np.sqrt((diff * diff).sum(-1).min(axis=1))


def edge_proximity(points, segments, radius=0.02):
    """Fraction of points within ``radius`` of any segment (sharp edges and corners)."""
    return float((distance_to_segments(points, segments) <= radius).mean())
