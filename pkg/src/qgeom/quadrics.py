"""Quadric error matrices: construction, per-vertex accumulation and evaluation.

A quadric is the symmetric 4x4 form ``Q = sum(p p^T)`` over planes
``p = [a, b, c, d]``; ``s^T Q s`` with ``s = [x, y, z, 1]`` is the sum of
squared point-plane distances. Quadrics are stored as their 10 upper
triangular coefficients in the order::

    q00 q01 q02 q03 q11 q12 q13 q22 q23 q33

Batched routines take coefficient arrays of shape ``(n, 10)``.
"""

from __future__ import annotations

import csv
import warnings
import weakref
from dataclasses import dataclass

import numpy as np

from .mesh_core import warn_degenerate

UPPER = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))
COEFF_NAMES = tuple(f"q{i}{j}" for i, j in UPPER)
_ROWS = np.array([i for i, _ in UPPER])
_COLS = np.array([j for _, j in UPPER])


class QuadricMatrix:
    """Immutable symmetric 4x4 quadric held as 10 coefficients."""

    __slots__ = ("_c",)

    def __init__(self, coeffs=None):
        c = np.zeros(10) if coeffs is None else np.array(coeffs, dtype=float).reshape(10)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or not np.allclose(m, m.T):
            raise ValueError("quadric matrix must be a symmetric 4x4 array")
        return cls(m[_ROWS, _COLS])

    @property
    def coeffs(self):
        return self._c

    @property
    def matrix(self):
        m = np.zeros((4, 4))
        m[_ROWS, _COLS] = self._c
        m[_COLS, _ROWS] = self._c
        return m

    def __add__(self, other):
        if not isinstance(other, QuadricMatrix):
            return NotImplemented
        return QuadricMatrix(self._c + other._c)

    def __mul__(self, k):
        return QuadricMatrix(self._c * float(k))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, QuadricMatrix) and np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash(self._c.tobytes())

    def __repr__(self):
        return f"QuadricMatrix({np.array2string(self._c, precision=6)})"

    def __call__(self, point):
        return eval_quadric(self, point)


def plane_quadric_coeffs(planes):
    """Coefficients of ``p p^T`` for each row of ``planes`` (shape ``(n, 4)``)."""
    p = np.asarray(planes, dtype=float)
    return p[..., _ROWS] * p[..., _COLS]


def plane_quadric(plane):
    """Rank-1 quadric of a single plane (a :class:`Plane` or 4-vector)."""
    coeffs = getattr(plane, "coeffs", plane)
    return QuadricMatrix(plane_quadric_coeffs(np.asarray(coeffs, dtype=float)))


def eval_quadrics(coeffs, points):
    """Row-wise ``s^T Q s`` for ``coeffs`` ``(n, 10)`` and ``points`` ``(n, 3)``."""
    q = np.asarray(coeffs, dtype=float)
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return (q[..., 0] * x * x + q[..., 4] * y * y + q[..., 7] * z * z
            + 2.0 * (q[..., 1] * x * y + q[..., 2] * x * z + q[..., 5] * y * z)
            + 2.0 * (q[..., 3] * x + q[..., 6] * y + q[..., 8] * z)
            + q[..., 9])


def quadric_gradients(coeffs, points):
    """Row-wise gradient ``2 (A x + b)`` of ``s^T Q s`` with respect to ``x``."""
    q = np.asarray(coeffs, dtype=float)
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    gx = q[..., 0] * x + q[..., 1] * y + q[..., 2] * z + q[..., 3]
    gy = q[..., 1] * x + q[..., 4] * y + q[..., 5] * z + q[..., 6]
    gz = q[..., 2] * x + q[..., 5] * y + q[..., 7] * z + q[..., 8]
    return 2.0 * np.stack([gx, gy, gz], axis=-1)


def eval_quadric(q, point):
    return float(eval_quadrics(q.coeffs, np.asarray(point, dtype=float)))


def eval_quadric_gradient(q, point):
    return quadric_gradients(q.coeffs, np.asarray(point, dtype=float))


def split_quadric(coeffs):
    """Partition into ``(A, b, c)`` with ``s^T Q s = x^T A x + 2 b^T x + c``."""
    m = QuadricMatrix(coeffs).matrix
    return m[:3, :3], m[:3, 3], m[3, 3]


@dataclass(frozen=True, eq=False)
class VertexQuadrics:
    """Per-vertex quadric coefficients for a mesh.

    ``isolated`` lists vertices with no incident (non-degenerate) face; they
    carry the zero quadric.
    """

    coeffs: np.ndarray
    isolated: tuple = ()
    skipped_faces: int = 0

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        return QuadricMatrix(self.coeffs[i])

    def __iter__(self):
        return (QuadricMatrix(c) for c in self.coeffs)


def accumulate_vertex_quadrics(mesh, area_weighted=False):
    """Sum the plane quadric of every incident face onto each vertex.

    Faces are counted with multiplicity: two coplanar triangles contribute
    the same plane twice. Degenerate faces are skipped with a warning.
    """
    skipped = warn_degenerate(mesh, "accumulate_vertex_quadrics")
    ok = ~mesh.degenerate_faces
    face_q = plane_quadric_coeffs(mesh.face_planes[ok])
    if area_weighted:
        face_q = face_q * mesh.face_areas[ok, None]
    faces = mesh.faces[ok]
    acc = np.zeros((mesh.n_vertices, 10))
    for k in range(3):
        np.add.at(acc, faces[:, k], face_q)
    touched = np.zeros(mesh.n_vertices, dtype=bool)
    touched[faces.ravel()] = True
    isolated = tuple(int(i) for i in np.flatnonzero(~touched))
    if isolated:
        warnings.warn(
            f"{len(isolated)} isolated vertices get a zero quadric (first: {isolated[0]})",
            stacklevel=2,
        )
    acc.setflags(write=False)
    return VertexQuadrics(acc, isolated, skipped)


_cache = weakref.WeakKeyDictionary()


def vertex_quadrics(mesh, area_weighted=False, recompute=False):
    """Cached :func:`accumulate_vertex_quadrics`, keyed by mesh identity."""
    per_mesh = _cache.setdefault(mesh, {})
    if recompute or area_weighted not in per_mesh:
        per_mesh[area_weighted] = accumulate_vertex_quadrics(mesh, area_weighted)
    return per_mesh[area_weighted]


def write_quadrics_csv(quadrics, path):
    """Dump one row per vertex: index followed by the 10 coefficients."""
    coeffs = getattr(quadrics, "coeffs", quadrics)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("vertex",) + COEFF_NAMES)
        for i, row in enumerate(np.asarray(coeffs)):
            writer.writerow([i] + [repr(float(v)) for v in row])


def read_quadrics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ("vertex",) + COEFF_NAMES:
        raise ValueError(f"{path}: not a quadric dump")
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(-1, 10)
