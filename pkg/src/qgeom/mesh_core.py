"""Triangle meshes, point clouds and the preprocessing steps applied to them.

Meshes are immutable: vertex and face arrays are frozen on construction and
all derived data (face planes, adjacency, areas) is computed lazily and
cached on the instance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc_labels

from .errors import DegenerateFace, DegenerateGeometry, IsolatedVertex

# faces with area below this are treated as slivers and skipped
DEGENERATE_AREA = 1e-12


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Plane:
    """Oriented plane ``a*x + b*y + c*z + d = 0`` with unit normal ``(a, b, c)``."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,):
            raise ValueError("plane normal must be a 3-vector")
        if abs(float(n @ n) - 1.0) > 1e-9:
            raise ValueError("plane normal must have unit length")
        object.__setattr__(self, "normal", tuple(float(v) for v in n))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def coeffs(self):
        """The homogeneous 4-vector ``[a, b, c, d]``."""
        return np.array([*self.normal, self.offset])

    def signed_distance(self, point):
        return float(np.dot(self.normal, point) + self.offset)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered set of 3D points, shape ``(n, 3)``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains NaN or Inf coordinates")
        object.__setattr__(self, "points", _frozen(pts, float))

    def __len__(self):
        return len(self.points)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.points
        return self.points.astype(dtype)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like of int, shape (f, 3)
        Counter-clockwise vertex indices; winding fixes the face normal.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.size == 0:
            v = v.reshape(0, 3)
        if f.size == 0:
            f = f.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must have shape (f, 3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh vertices contain NaN or Inf")
        if len(f):
            if f.min() < 0 or f.max() >= len(v):
                raise ValueError("face index out of bounds")
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise ValueError("face with repeated vertex index")
        object.__setattr__(self, "vertices", _frozen(v, float))
        object.__setattr__(self, "faces", _frozen(f, np.int64))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def _face_cross(self):
        v = self.vertices
        f = self.faces
        return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])

    @cached_property
    def face_areas(self):
        return _frozen(0.5 * np.linalg.norm(self._face_cross, axis=1), float)

    @cached_property
    def degenerate_faces(self):
        """Boolean mask of faces whose area is below ``DEGENERATE_AREA``."""
        return _frozen(self.face_areas < DEGENERATE_AREA, bool)

    @cached_property
    def face_planes(self):
        """Per-face ``[a, b, c, d]`` rows; degenerate faces get all zeros."""
        cross = self._face_cross
        norm = np.linalg.norm(cross, axis=1)
        ok = ~self.degenerate_faces
        planes = np.zeros((self.n_faces, 4))
        planes[ok, :3] = cross[ok] / norm[ok, None]
        planes[ok, 3] = -np.einsum("ij,ij->i", planes[ok, :3], self.vertices[self.faces[ok, 0]])
        return _frozen(planes, float)

    @cached_property
    def vertex_faces(self):
        """CSR adjacency ``(offsets, face_ids)`` of faces incident to each vertex.

        Face ids are sorted ascending within each vertex.
        """
        flat = self.faces.ravel()
        face_ids = np.repeat(np.arange(self.n_faces), 3)
        order = np.lexsort((face_ids, flat))
        counts = np.bincount(flat, minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return _frozen(offsets, np.int64), _frozen(face_ids[order], np.int64)

    @cached_property
    def edges(self):
        """Unique undirected edges as sorted ``(i, j)`` pairs, ``i < j``."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return _frozen(np.unique(e, axis=0).reshape(-1, 2), np.int64)

    @cached_property
    def vertex_neighbors(self):
        """CSR 1-ring ``(offsets, neighbor_ids)``, neighbors sorted ascending."""
        e = self.edges
        both = np.concatenate([e, e[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return _frozen(offsets, np.int64), _frozen(both[:, 1], np.int64)

    def compact(self):
        """Drop vertices not referenced by any face, preserving vertex order."""
        used = np.unique(self.faces)
        if len(used) == self.n_vertices:
            return self
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return TriangleMesh(self.vertices[used], remap[self.faces])


def face_plane(mesh, face):
    """Plane through triangle ``face`` of ``mesh``, oriented by its winding."""
    if mesh.degenerate_faces[face]:
        raise DegenerateFace(f"face {face} has area {mesh.face_areas[face]:.3g}", face=face)
    a, b, c, d = mesh.face_planes[face]
    return Plane((a, b, c), d)


def connected_components(mesh):
    """Split ``mesh`` into its maximal vertex-connected pieces.

    Connectivity is by shared vertex index. Components are ordered by their
    lowest face index and each is re-indexed compactly (relative vertex
    order preserved). Unreferenced vertices are dropped.
    """
    if mesh.n_faces == 0:
        return []
    f = mesh.faces
    n = mesh.n_vertices
    rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = _cc_labels(graph, directed=False)
    face_label = labels[f[:, 0]]
    # order components by first face occurrence
    _, first = np.unique(face_label, return_index=True)
    parts = []
    for label in face_label[np.sort(first)]:
        sub = f[face_label == label]
        parts.append(TriangleMesh(mesh.vertices, sub).compact())
    return parts


def normalize_unit_sphere(mesh):
    """Center on the bounding-box midpoint and scale the farthest vertex to radius 1.

    Returns
    -------
    mesh : TriangleMesh
    center : ndarray, shape (3,)
    scale : float
        ``normalized = (original - center) * scale``.
    """
    v = mesh.vertices
    if len(v) == 0:
        raise DegenerateGeometry("mesh has no vertices")
    center = 0.5 * (v.min(axis=0) + v.max(axis=0))
    radius = np.sqrt(((v - center) ** 2).sum(axis=1)).max()
    if not radius > 0.0:
        raise DegenerateGeometry("all vertices coincide")
    scale = 1.0 / radius
    return TriangleMesh((v - center) * scale, mesh.faces), center, scale


def sample_surface(mesh, count, seed, return_faces=False):
    """Draw ``count`` points uniformly (by area) from the mesh surface."""
    if count < 0:
        raise ValueError("count must be non-negative")
    areas = np.where(mesh.degenerate_faces, 0.0, mesh.face_areas)
    total = areas.sum()
    if not total > 0.0:
        raise DegenerateGeometry("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(areas)
    pick = rng.random(count) * cum[-1]
    face_idx = np.minimum(np.searchsorted(cum, pick, side="right"), len(cum) - 1)
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    tri = mesh.vertices[mesh.faces[face_idx]]
    pts = ((1.0 - r1)[:, None] * tri[:, 0]
           + (r1 * (1.0 - r2))[:, None] * tri[:, 1]
           + (r1 * r2)[:, None] * tri[:, 2])
    cloud = PointCloud(pts.reshape(-1, 3))
    if return_faces:
        return cloud, face_idx
    return cloud


def vertex_normals(mesh):
    """Area-weighted vertex normals, renormalized to unit length."""
    cross = np.where(mesh.degenerate_faces[:, None], 0.0, mesh._face_cross)
    acc = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], cross)
    norm = np.linalg.norm(acc, axis=1)
    touched = np.zeros(mesh.n_vertices, dtype=bool)
    touched[mesh.faces[~mesh.degenerate_faces].ravel()] = True
    bad = np.flatnonzero(~touched | (norm == 0.0))
    if len(bad):
        raise IsolatedVertex(
            f"{len(bad)} vertices have no incident non-degenerate face (first: {bad[0]})",
            vertices=bad,
        )
    return acc / norm[:, None]


def warn_degenerate(mesh, context):
    n_bad = int(mesh.degenerate_faces.sum())
    if n_bad:
        warnings.warn(f"{context}: skipping {n_bad} degenerate face(s)", stacklevel=3)
    return n_bad
