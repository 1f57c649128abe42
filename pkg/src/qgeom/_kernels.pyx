# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: kd-tree nearest neighbour, point-triangle distance,
nearest-triangle queries over a bounding volume hierarchy.

Every routine mirrors a function of the same name in ``_fallback`` and must
return identical results (ties resolve to the lowest index).
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY

cnp.import_array()

NAME = "cython"

cdef enum:
    LEAF_SIZE = 8
    BVH_LEAF = 4

ctypedef cnp.int64_t idx_t


# region codes: 0 face, 1..3 edges (v0v1, v1v2, v2v0), 4..6 vertices
cdef inline int _closest_on_triangle(
    double px, double py, double pz,
    double ax, double ay, double az,
    double bx, double by, double bz,
    double cx, double cy, double cz,
    double *out,
) noexcept nogil:
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double apx = px - ax, apy = py - ay, apz = pz - az
    cdef double d1 = abx * apx + aby * apy + abz * apz
    cdef double d2 = acx * apx + acy * apy + acz * apz
    cdef double bpx, bpy, bpz, cpx, cpy, cpz
    cdef double d3, d4, d5, d6, va, vb, vc, v, w, denom
    if d1 <= 0.0 and d2 <= 0.0:
        out[0] = ax; out[1] = ay; out[2] = az
        return 4
    bpx = px - bx; bpy = py - by; bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        out[0] = bx; out[1] = by; out[2] = bz
        return 5
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        out[0] = ax + v * abx; out[1] = ay + v * aby; out[2] = az + v * abz
        return 1
    cpx = px - cx; cpy = py - cy; cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        out[0] = cx; out[1] = cy; out[2] = cz
        return 6
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        out[0] = ax + w * acx; out[1] = ay + w * acy; out[2] = az + w * acz
        return 3
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = bx + w * (cx - bx); out[1] = by + w * (cy - by); out[2] = bz + w * (cz - bz)
        return 2
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[0] = ax + abx * v + acx * w
    out[1] = ay + aby * v + acy * w
    out[2] = az + abz * v + acz * w
    return 0


cdef inline double _sq(double px, double py, double pz, double *q) noexcept nogil:
    cdef double dx = px - q[0], dy = py - q[1], dz = pz - q[2]
    return dx * dx + dy * dy + dz * dz


def point_triangle_batch(points, a, b, c):
    """Row-wise squared distance, closest point and region code."""
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], i
    sqd_arr = np.empty(n)
    closest_arr = np.empty((n, 3))
    region_arr = np.empty(n, dtype=np.int8)
    cdef double[::1] sqd = sqd_arr
    cdef double[:, ::1] cl = closest_arr
    cdef cnp.int8_t[::1] reg = region_arr
    cdef double q[3]
    with nogil:
        for i in range(n):
            reg[i] = _closest_on_triangle(
                P[i, 0], P[i, 1], P[i, 2],
                A[i, 0], A[i, 1], A[i, 2],
                B[i, 0], B[i, 1], B[i, 2],
                C[i, 0], C[i, 1], C[i, 2], q)
            cl[i, 0] = q[0]; cl[i, 1] = q[1]; cl[i, 2] = q[2]
            sqd[i] = _sq(P[i, 0], P[i, 1], P[i, 2], q)
    return sqd_arr, closest_arr, region_arr


cdef void _candidate_one(
    Py_ssize_t i, const double[:, ::1] P, const double[:, ::1] V, const idx_t[:, ::1] F,
    const idx_t[::1] off, const idx_t[::1] cand, double[::1] sqd, idx_t[::1] best_f,
    double[:, ::1] cl, cnp.int8_t[::1] reg,
) noexcept nogil:
    cdef double q[3]
    cdef double d
    cdef int r
    cdef Py_ssize_t k
    cdef idx_t f, ia, ib, ic
    for k in range(off[i], off[i + 1]):
        f = cand[k]
        ia = F[f, 0]; ib = F[f, 1]; ic = F[f, 2]
        r = _closest_on_triangle(
            P[i, 0], P[i, 1], P[i, 2],
            V[ia, 0], V[ia, 1], V[ia, 2],
            V[ib, 0], V[ib, 1], V[ib, 2],
            V[ic, 0], V[ic, 1], V[ic, 2], q)
        d = _sq(P[i, 0], P[i, 1], P[i, 2], q)
        if d < sqd[i]:
            sqd[i] = d
            best_f[i] = f
            reg[i] = r
            cl[i, 0] = q[0]; cl[i, 1] = q[1]; cl[i, 2] = q[2]


def nearest_candidate(points, vertices, faces, offsets, candidates, int num_threads=1):
    """For point ``i`` take the closest of faces ``candidates[offsets[i]:offsets[i+1]]``.

    Returns ``(sqdist, face, closest, region)``; ``face`` is -1 for an empty
    candidate list. Ties keep the earliest candidate.
    """
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] V = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef const idx_t[:, ::1] F = np.ascontiguousarray(faces, dtype=np.int64)
    cdef const idx_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const idx_t[::1] cand = np.ascontiguousarray(candidates, dtype=np.int64)
    cdef Py_ssize_t n = P.shape[0], i
    sqd_arr = np.full(n, np.inf)
    face_arr = np.full(n, -1, dtype=np.int64)
    closest_arr = np.zeros((n, 3))
    region_arr = np.full(n, -1, dtype=np.int8)
    cdef double[::1] sqd = sqd_arr
    cdef idx_t[::1] best_f = face_arr
    cdef double[:, ::1] cl = closest_arr
    cdef cnp.int8_t[::1] reg = region_arr
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        _candidate_one(i, P, V, F, off, cand, sqd, best_f, cl, reg)
    return sqd_arr, face_arr, closest_arr, region_arr


cdef Py_ssize_t _select(idx_t[::1] perm, const double[:, ::1] pts, int axis,
                        Py_ssize_t lo, Py_ssize_t hi, Py_ssize_t k) noexcept nogil:
    # quickselect on perm[lo:hi] so that perm[k] holds the k-th key
    cdef Py_ssize_t i, j, mid
    cdef double pivot
    cdef idx_t tmp
    hi -= 1
    while lo < hi:
        mid = lo + (hi - lo) // 2
        pivot = pts[perm[mid], axis]
        i = lo
        j = hi
        while i <= j:
            while pts[perm[i], axis] < pivot:
                i += 1
            while pts[perm[j], axis] > pivot:
                j -= 1
            if i <= j:
                tmp = perm[i]; perm[i] = perm[j]; perm[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return k


cdef class KDTree:
    """Static 3D kd-tree for exact nearest-neighbour queries."""

    cdef const double[:, ::1] pts
    cdef idx_t[::1] perm
    cdef idx_t[::1] node_lo, node_hi, node_left, node_right
    cdef cnp.int8_t[::1] node_axis
    cdef double[::1] node_split
    cdef Py_ssize_t n_nodes
    cdef readonly Py_ssize_t n

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("KDTree needs a non-empty (n, 3) array")
        self.pts = pts
        self.n = pts.shape[0]
        self.perm = np.arange(self.n, dtype=np.int64)
        cap = 4 * (self.n // LEAF_SIZE + 1) + 1
        self.node_lo = np.empty(cap, dtype=np.int64)
        self.node_hi = np.empty(cap, dtype=np.int64)
        self.node_left = np.empty(cap, dtype=np.int64)
        self.node_right = np.empty(cap, dtype=np.int64)
        self.node_axis = np.empty(cap, dtype=np.int8)
        self.node_split = np.empty(cap)
        self.n_nodes = 0
        with nogil:
            self._build(0, self.n)

    cdef Py_ssize_t _build(self, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
        cdef Py_ssize_t node = self.n_nodes
        cdef Py_ssize_t i, mid
        cdef int axis, d
        cdef double lo_b[3]
        cdef double hi_b[3]
        cdef double v, spread, best
        self.n_nodes += 1
        self.node_lo[node] = lo
        self.node_hi[node] = hi
        self.node_left[node] = -1
        self.node_right[node] = -1
        if hi - lo <= LEAF_SIZE:
            return node
        for d in range(3):
            lo_b[d] = self.pts[self.perm[lo], d]
            hi_b[d] = lo_b[d]
        for i in range(lo + 1, hi):
            for d in range(3):
                v = self.pts[self.perm[i], d]
                if v < lo_b[d]:
                    lo_b[d] = v
                if v > hi_b[d]:
                    hi_b[d] = v
        axis = 0
        best = hi_b[0] - lo_b[0]
        for d in range(1, 3):
            spread = hi_b[d] - lo_b[d]
            if spread > best:
                best = spread
                axis = d
        mid = lo + (hi - lo) // 2
        _select(self.perm, self.pts, axis, lo, hi, mid)
        self.node_axis[node] = axis
        self.node_split[node] = self.pts[self.perm[mid], axis]
        self.node_left[node] = self._build(lo, mid)
        self.node_right[node] = self._build(mid, hi)
        return node

    cdef void _search(self, Py_ssize_t node, double qx, double qy, double qz,
                      double *best_d, idx_t *best_i) noexcept nogil:
        cdef Py_ssize_t i
        cdef idx_t j
        cdef double dx, dy, dz, d, diff
        cdef Py_ssize_t near, far
        if self.node_left[node] < 0:
            for i in range(self.node_lo[node], self.node_hi[node]):
                j = self.perm[i]
                dx = qx - self.pts[j, 0]
                dy = qy - self.pts[j, 1]
                dz = qz - self.pts[j, 2]
                d = dx * dx + dy * dy + dz * dz
                if d < best_d[0] or (d == best_d[0] and j < best_i[0]):
                    best_d[0] = d
                    best_i[0] = j
            return
        if self.node_axis[node] == 0:
            diff = qx - self.node_split[node]
        elif self.node_axis[node] == 1:
            diff = qy - self.node_split[node]
        else:
            diff = qz - self.node_split[node]
        if diff < 0.0:
            near = self.node_left[node]
            far = self.node_right[node]
        else:
            near = self.node_right[node]
            far = self.node_left[node]
        self._search(near, qx, qy, qz, best_d, best_i)
        if diff * diff <= best_d[0]:
            self._search(far, qx, qy, qz, best_d, best_i)

    cdef void _query_one(self, Py_ssize_t i, const double[:, ::1] Q, idx_t[::1] out_i,
                         double[::1] out_d) noexcept nogil:
        cdef double bd = INFINITY
        cdef idx_t bi = self.n
        self._search(0, Q[i, 0], Q[i, 1], Q[i, 2], &bd, &bi)
        out_i[i] = bi
        out_d[i] = bd

    def query(self, queries, int num_threads=1):
        """Nearest indexed point for each query row: ``(indices, sqdists)``."""
        cdef const double[:, ::1] Q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        cdef Py_ssize_t m = Q.shape[0], i
        idx_arr = np.empty(m, dtype=np.int64)
        d_arr = np.empty(m)
        cdef idx_t[::1] out_i = idx_arr
        cdef double[::1] out_d = d_arr
        for i in prange(m, nogil=True, num_threads=num_threads, schedule="static"):
            self._query_one(i, Q, out_i, out_d)
        return idx_arr, d_arr


cdef class TriangleBVH:
    """Axis-aligned bounding volume hierarchy over mesh triangles."""

    cdef const double[:, ::1] verts
    cdef const idx_t[:, ::1] faces
    cdef idx_t[::1] perm
    cdef double[:, ::1] box_lo, box_hi, cent
    cdef idx_t[::1] node_lo, node_hi, node_left, node_right
    cdef Py_ssize_t n_nodes
    cdef readonly Py_ssize_t n

    def __init__(self, vertices, faces):
        self.verts = np.ascontiguousarray(vertices, dtype=np.float64)
        f = np.ascontiguousarray(faces, dtype=np.int64)
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] == 0:
            raise ValueError("TriangleBVH needs a non-empty (f, 3) face array")
        self.faces = f
        self.n = f.shape[0]
        self.perm = np.arange(self.n, dtype=np.int64)
        self.cent = np.ascontiguousarray(np.asarray(self.verts)[f].mean(axis=1))
        cap = 4 * (self.n // BVH_LEAF + 1) + 1
        self.box_lo = np.empty((cap, 3))
        self.box_hi = np.empty((cap, 3))
        self.node_lo = np.empty(cap, dtype=np.int64)
        self.node_hi = np.empty(cap, dtype=np.int64)
        self.node_left = np.empty(cap, dtype=np.int64)
        self.node_right = np.empty(cap, dtype=np.int64)
        self.n_nodes = 0
        with nogil:
            self._build(0, self.n)

    cdef Py_ssize_t _build(self, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
        cdef Py_ssize_t node = self.n_nodes
        cdef Py_ssize_t i, mid
        cdef int d, k, axis
        cdef idx_t f
        cdef double v, spread, best
        cdef double clo[3]
        cdef double chi[3]
        self.n_nodes += 1
        self.node_lo[node] = lo
        self.node_hi[node] = hi
        self.node_left[node] = -1
        self.node_right[node] = -1
        for d in range(3):
            self.box_lo[node, d] = INFINITY
            self.box_hi[node, d] = -INFINITY
            clo[d] = INFINITY
            chi[d] = -INFINITY
        for i in range(lo, hi):
            f = self.perm[i]
            for k in range(3):
                for d in range(3):
                    v = self.verts[self.faces[f, k], d]
                    if v < self.box_lo[node, d]:
                        self.box_lo[node, d] = v
                    if v > self.box_hi[node, d]:
                        self.box_hi[node, d] = v
            for d in range(3):
                v = self.cent[f, d]
                if v < clo[d]:
                    clo[d] = v
                if v > chi[d]:
                    chi[d] = v
        if hi - lo <= BVH_LEAF:
            return node
        axis = 0
        best = chi[0] - clo[0]
        for d in range(1, 3):
            spread = chi[d] - clo[d]
            if spread > best:
                best = spread
                axis = d
        mid = lo + (hi - lo) // 2
        _select(self.perm, self.cent, axis, lo, hi, mid)
        self.node_left[node] = self._build(lo, mid)
        self.node_right[node] = self._build(mid, hi)
        return node

    cdef inline double _box_sq(self, Py_ssize_t node, double *p) noexcept nogil:
        cdef double acc = 0.0, t
        cdef int d
        for d in range(3):
            if p[d] < self.box_lo[node, d]:
                t = self.box_lo[node, d] - p[d]
                acc += t * t
            elif p[d] > self.box_hi[node, d]:
                t = p[d] - self.box_hi[node, d]
                acc += t * t
        return acc

    cdef void _search(self, Py_ssize_t node, double *p, double *best_d, idx_t *best_f,
                      double *best_q) noexcept nogil:
        cdef Py_ssize_t i, a, b
        cdef idx_t f, ia, ib, ic
        cdef double q[3]
        cdef double d, da, db
        if self.node_left[node] < 0:
            for i in range(self.node_lo[node], self.node_hi[node]):
                f = self.perm[i]
                ia = self.faces[f, 0]; ib = self.faces[f, 1]; ic = self.faces[f, 2]
                _closest_on_triangle(
                    p[0], p[1], p[2],
                    self.verts[ia, 0], self.verts[ia, 1], self.verts[ia, 2],
                    self.verts[ib, 0], self.verts[ib, 1], self.verts[ib, 2],
                    self.verts[ic, 0], self.verts[ic, 1], self.verts[ic, 2], q)
                d = _sq(p[0], p[1], p[2], q)
                if d < best_d[0] or (d == best_d[0] and f < best_f[0]):
                    best_d[0] = d
                    best_f[0] = f
                    best_q[0] = q[0]; best_q[1] = q[1]; best_q[2] = q[2]
            return
        a = self.node_left[node]
        b = self.node_right[node]
        da = self._box_sq(a, p)
        db = self._box_sq(b, p)
        if db < da:
            a, b = b, a
            da, db = db, da
        if da <= best_d[0]:
            self._search(a, p, best_d, best_f, best_q)
        if db <= best_d[0]:
            self._search(b, p, best_d, best_f, best_q)

    cdef void _query_one(self, Py_ssize_t i, const double[:, ::1] P, double[::1] out_d,
                         idx_t[::1] out_f, double[:, ::1] out_q) noexcept nogil:
        cdef double p[3]
        cdef double bq[3]
        cdef double bd = INFINITY
        cdef idx_t bf = self.n
        p[0] = P[i, 0]; p[1] = P[i, 1]; p[2] = P[i, 2]
        bq[0] = 0.0; bq[1] = 0.0; bq[2] = 0.0
        self._search(0, p, &bd, &bf, bq)
        out_d[i] = bd
        out_f[i] = bf
        out_q[i, 0] = bq[0]; out_q[i, 1] = bq[1]; out_q[i, 2] = bq[2]

    def query(self, points, int num_threads=1):
        """Nearest triangle per point: ``(sqdists, face_ids, closest_points)``."""
        cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        cdef Py_ssize_t m = P.shape[0], i
        d_arr = np.empty(m)
        f_arr = np.empty(m, dtype=np.int64)
        q_arr = np.empty((m, 3))
        cdef double[::1] out_d = d_arr
        cdef idx_t[::1] out_f = f_arr
        cdef double[:, ::1] out_q = q_arr
        for i in prange(m, nogil=True, num_threads=num_threads, schedule="static"):
            self._query_one(i, P, out_d, out_f, out_q)
        return d_arr, f_arr, q_arr
