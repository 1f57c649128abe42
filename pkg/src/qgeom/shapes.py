"""Procedural meshes used by tests, experiments and benchmarks."""

from __future__ import annotations

import numpy as np

from .mesh_core import TriangleMesh


def cube(size=1.0, origin=(0.0, 0.0, 0.0)):
    """Axis-aligned 8-vertex, 12-triangle cube.

    Every face diagonal passes through corner 0 (the ``origin`` corner) or
    corner 7 (the opposite one), so those two corners see all three of their
    faces with equal incident area.
    """
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    # reorder to index = x + 2y + 4z
    corners = corners[np.lexsort((corners[:, 0], corners[:, 1], corners[:, 2]))]
    faces = [
        (0, 2, 3), (0, 3, 1),  # z = 0
        (4, 5, 7), (4, 7, 6),  # z = 1
        (0, 4, 6), (0, 6, 2),  # x = 0
        (1, 3, 7), (1, 7, 5),  # x = 1
        (0, 1, 5), (0, 5, 4),  # y = 0
        (2, 6, 7), (2, 7, 3),  # y = 1
    ]
    return TriangleMesh(corners * size + np.asarray(origin, dtype=float), faces)


def grid(n=10, size=1.0, z=0.0):
    """Planar ``n x n`` vertex grid on ``z = const``, normals +z.

    Interior vertices have 6 incident triangles.
    """
    u = np.linspace(0.0, size, n)
    xx, yy = np.meshgrid(u, u, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel(), np.full(n * n, float(z))])
    idx = np.arange(n * n).reshape(n, n)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    v01 = idx[:-1, 1:].ravel()
    faces = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    return TriangleMesh(verts, faces)


_CUBE_SIDES = (
    # outward normal, u axis, v axis with u x v = normal
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
)


def subdivided_cube(n=20, size=1.0):
    """Cube centered at the origin with each side split into an ``n x n`` grid.

    Vertices shared between sides are welded; the mesh has
    ``6 n^2 + 2`` vertices.
    """
    verts, faces, key_to_id = [], [], {}
    t = np.linspace(0.0, 1.0, n + 1)
    for normal, eu, ev in _CUBE_SIDES:
        normal, eu, ev = (np.array(a, dtype=float) for a in (normal, eu, ev))
        origin = 0.5 * (normal - eu - ev)
        ids = np.empty((n + 1, n + 1), dtype=np.int64)
        for i, a in enumerate(t):
            for j, b in enumerate(t):
                p = origin + a * eu + b * ev
                key = tuple(np.round(p * 2 * n).astype(int))
                if key not in key_to_id:
                    key_to_id[key] = len(verts)
                    verts.append(p * size)
                ids[i, j] = key_to_id[key]
        for i in range(n):
            for j in range(n):
                a, b, c, d = ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]
                faces.append((a, b, c))
                faces.append((a, c, d))
    return TriangleMesh(np.array(verts), faces)


def icosphere(subdivisions=3, radius=1.0):
    """Geodesic sphere; ``subdivisions=3`` gives 642 vertices."""
    phi = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
             (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
             (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, faces)


def extrude(polygon, cap_triangles=None, height=1.0, layers=1):
    """Prism over a counter-clockwise 2D polygon.

    ``cap_triangles`` indexes ``polygon``; when omitted each cap is fanned
    from an added center vertex (valid for star-shaped polygons).
    """
    poly = np.asarray(polygon, dtype=float)
    m = len(poly)
    zs = np.linspace(0.0, height, layers + 1)
    verts = [np.array([x, y, z]) for z in zs for x, y in poly]

    def vid(i, k):
        return k * m + (i % m)

    faces = []
    for k in range(layers):
        for i in range(m):
            a, b = vid(i, k), vid(i + 1, k)
            c, d = vid(i + 1, k + 1), vid(i, k + 1)
            faces += [(a, b, c), (a, c, d)]
    if cap_triangles is None:
        center = poly.mean(axis=0)
        bottom = len(verts)
        verts.append(np.array([center[0], center[1], 0.0]))
        top = len(verts)
        verts.append(np.array([center[0], center[1], height]))
        for i in range(m):
            faces.append((bottom, vid(i + 1, 0), vid(i, 0)))
            faces.append((top, vid(i, layers), vid(i + 1, layers)))
    else:
        for a, b, c in cap_triangles:
            faces.append((vid(a, 0), vid(c, 0), vid(b, 0)))
            faces.append((vid(a, layers), vid(b, layers), vid(c, layers)))
    return TriangleMesh(np.array(verts), faces)


L_POLYGON = ((0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0))
L_CAPS = ((0, 1, 2), (0, 2, 3), (0, 3, 5), (3, 4, 5))


def l_prism(height=1.0, layers=2):
    """L-shaped prism; with ``layers >= 2`` the vertical edges carry mid-height vertices."""
    return extrude(L_POLYGON, L_CAPS, height, layers)


def cylinder(segments=24, radius=1.0, height=2.0, layers=4):
    angles = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    ring = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
    return extrude(ring, None, height, layers)


def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def cad_like(seed):
    """Randomly perturbed prism: convex random polygon, random height, pose and anisotropic scale."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(5, 10))
    angles = np.sort(rng.uniform(0.0, 2 * np.pi, m))
    angles += np.linspace(0.0, 0.3, m)  # keep angles distinct
    angles = np.sort(np.mod(angles, 2 * np.pi))
    poly = np.column_stack([np.cos(angles), np.sin(angles)]) * rng.uniform(0.6, 1.0)
    mesh = extrude(poly, None, height=float(rng.uniform(0.3, 1.5)), layers=int(rng.integers(1, 4)))
    scale = rng.uniform(0.5, 2.0, size=3)
    verts = (mesh.vertices * scale) @ _rotation(rng).T + rng.normal(size=3)
    return TriangleMesh(verts, mesh.faces)
