"""Brute-force reference implementations used as test oracles.

These share no code with the package: plain loops and dense distance
matrices only.
"""

import numpy as np


def nearest_brute(queries, points):
    d = ((queries[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    idx = np.argmin(d, axis=1)  # first minimum -> lowest index on ties
    return idx, d[np.arange(len(queries)), idx]


def chamfer_brute(a, b):
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    return d.min(axis=1).mean() + d.min(axis=0).mean()


def _segment_sqdist(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    diff = p - (a + t * ab)
    return float(diff @ diff)


def point_triangle_exact(p, a, b, c):
    """Squared distance: plane projection if it falls inside, else nearest edge."""
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    h = np.dot(p - a, n)
    q = p - h * n
    inside = all(np.dot(np.cross(v1 - v0, q - v0), n) >= 0 for v0, v1 in ((a, b), (b, c), (c, a)))
    if inside:
        return h * h
    return min(_segment_sqdist(p, a, b), _segment_sqdist(p, b, c), _segment_sqdist(p, c, a))


def point_triangle_lattice(p, a, b, c, n=400):
    """Squared distance to a dense barycentric lattice over the triangle."""
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j <= n
    u = i[keep] / n
    v = j[keep] / n
    pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return float(((pts - p) ** 2).sum(-1).min())


def point_mesh_brute(points, vertices, faces):
    out = np.empty(len(points))
    for i, p in enumerate(points):
        out[i] = min(point_triangle_exact(p, *vertices[f]) for f in faces)
    return np.sqrt(out)


def numeric_gradient(fn, x, h=1e-5):
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        fp = fn(x)
        flat[k] = old - h
        fm = fn(x)
        flat[k] = old
        gflat[k] = (fp - fm) / (2 * h)
    return g


def closed_and_outward(mesh):
    """True when every edge has exactly two opposite half-edges and volume > 0."""
    f = mesh.faces
    half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    fwd = {tuple(e) for e in half.tolist()}
    if len(fwd) != len(half):
        return False
    if any((b, a) not in fwd for a, b in fwd):
        return False
    v = mesh.vertices[f]
    volume = np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0
    return volume > 0


def point_triangle_sampled(p, a, b, c, n=40, levels=8):
    """Squared distance by coarse-to-fine barycentric sampling.

    The squared distance is convex over the triangle, so zooming a sample
    window onto the best sample converges to the global minimum.
    """
    cu, cv, width = 0.5, 0.5, 1.0
    best = None
    for _ in range(levels):
        u, v = np.meshgrid(np.linspace(cu - width, cu + width, n + 1),
                           np.linspace(cv - width, cv + width, n + 1), indexing="ij")
        u, v = u.ravel(), v.ravel()
        ok = (u >= 0) & (v >= 0) & (u + v <= 1)
        u, v = u[ok], v[ok]
        pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
        d = ((pts - p) ** 2).sum(-1)
        k = int(np.argmin(d))
        if best is None or d[k] < best:
            best, cu, cv = float(d[k]), u[k], v[k]
        width *= 4.0 / n
    return best
