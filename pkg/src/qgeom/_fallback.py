"""Pure numpy implementations of the compiled kernels in ``_kernels.pyx``.

Same signatures and the same tie rules; nearest-neighbour and
nearest-triangle queries are blocked brute force instead of tree searches.
"""

import numpy as np

NAME = "python"

# elements per (queries x targets) block; bounds temporary memory
_BLOCK = 1 << 20


def point_triangle_batch(points, a, b, c):
    """Row-wise squared distance, closest point and region code.

    Region codes: 0 face, 1 edge v0v1, 2 edge v1v2, 3 edge v2v0,
    4..6 vertices v0..v2.
    """
    p = np.asarray(points, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)

    def dot(u, v):
        return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = dot(ab, ap)
    d2 = dot(ac, ap)
    bp = p - b
    d3 = dot(ab, bp)
    d4 = dot(ac, bp)
    cp = p - c
    d5 = dot(ab, cp)
    d6 = dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    # priority order matches the compiled branch order
    in_a = (d1 <= 0.0) & (d2 <= 0.0)
    in_b = (d3 >= 0.0) & (d4 <= d3)
    in_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    in_c = (d6 >= 0.0) & (d5 <= d6)
    in_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    in_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
    region = np.select([in_a, in_b, in_ab, in_c, in_ac, in_bc], [4, 5, 1, 6, 3, 2], 0).astype(np.int8)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        face_pt = a + ab * v[..., None] + ac * w[..., None]
        ab_pt = a + t_ab[..., None] * ab
        ac_pt = a + t_ac[..., None] * ac
        bc_pt = b + t_bc[..., None] * (c - b)

    r = region[..., None]
    closest = np.where(r == 4, a, np.where(r == 5, b, np.where(r == 6, c,
              np.where(r == 1, ab_pt, np.where(r == 3, ac_pt, np.where(r == 2, bc_pt, face_pt))))))
    diff = p - closest
    sqd = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
    return sqd, closest, region


def nearest_candidate(points, vertices, faces, offsets, candidates, num_threads=1):
    """For point ``i`` take the closest of faces ``candidates[offsets[i]:offsets[i+1]]``.

    Returns ``(sqdist, face, closest, region)``; ``face`` is -1 for an empty
    candidate list. Ties keep the earliest candidate.
    """
    p = np.asarray(points, dtype=float)
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=np.int64)
    off = np.asarray(offsets, dtype=np.int64)
    cand = np.asarray(candidates, dtype=np.int64)
    n = len(p)
    counts = np.diff(off)
    owner = np.repeat(np.arange(n), counts)
    pair_face = cand[off[0]:off[-1]] if n else cand[:0]
    tri = f[pair_face]
    sqd, closest, region = point_triangle_batch(p[owner], v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]])
    pos = np.arange(len(owner))
    order = np.lexsort((pos, sqd, owner))
    has = counts > 0
    first = order[(off[:-1] - off[0])[has]]

    out_d = np.full(n, np.inf)
    out_f = np.full(n, -1, dtype=np.int64)
    out_q = np.zeros((n, 3))
    out_r = np.full(n, -1, dtype=np.int8)
    out_d[has] = sqd[first]
    out_f[has] = pair_face[first]
    out_q[has] = closest[first]
    out_r[has] = region[first]
    return out_d, out_f, out_q, out_r


class KDTree:
    """Exact nearest neighbour by blocked brute force (API of the compiled kd-tree)."""

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("KDTree needs a non-empty (n, 3) array")
        self.pts = pts
        self.n = len(pts)

    def query(self, queries, num_threads=1):
        q = np.asarray(queries, dtype=float).reshape(-1, 3)
        idx = np.empty(len(q), dtype=np.int64)
        sqd = np.empty(len(q))
        step = max(1, _BLOCK // self.n)
        for lo in range(0, len(q), step):
            blk = q[lo:lo + step]
            dx = blk[:, None, 0] - self.pts[None, :, 0]
            dy = blk[:, None, 1] - self.pts[None, :, 1]
            dz = blk[:, None, 2] - self.pts[None, :, 2]
            d = dx * dx + dy * dy + dz * dz
            # argmin returns the first minimum: lowest index on ties
            best = d.argmin(axis=1)
            idx[lo:lo + step] = best
            sqd[lo:lo + step] = d[np.arange(len(blk)), best]
        return idx, sqd


class TriangleBVH:
    """Nearest triangle by blocked brute force (API of the compiled BVH)."""

    def __init__(self, vertices, faces):
        f = np.ascontiguousarray(faces, dtype=np.int64)
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise ValueError("TriangleBVH needs a non-empty (f, 3) face array")
        v = np.asarray(vertices, dtype=float)
        self.a, self.b, self.c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        self.n = len(f)

    def query(self, points, num_threads=1):
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        out_d = np.empty(len(p))
        out_f = np.empty(len(p), dtype=np.int64)
        out_q = np.empty((len(p), 3))
        step = max(1, (_BLOCK // 16) // self.n)
        for lo in range(0, len(p), step):
            blk = p[lo:lo + step]
            sqd, closest, _ = point_triangle_batch(
                blk[:, None, :], self.a[None], self.b[None], self.c[None])
            best = sqd.argmin(axis=1)
            rows = np.arange(len(blk))
            out_d[lo:lo + step] = sqd[rows, best]
            out_f[lo:lo + step] = best
            out_q[lo:lo + step] = closest[rows, best]
        return out_d, out_f, out_q
