"""Greedy quadric-error edge-collapse simplification.

Candidates are mesh edges only. Each collapse merges ``b`` into ``a`` at
the quadric-optimal position, sums their quadrics and is rejected if it
would break the local 2-manifold structure or rotate any surviving face
normal by more than 90 degrees. Open boundaries are protected by penalty
quadrics built from the plane perpendicular to each boundary edge.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import TargetTooSmall
from .mesh_core import TriangleMesh
from .quadrics import accumulate_vertex_quadrics, eval_quadrics, plane_quadric_coeffs, split_quadric

log = logging.getLogger(__name__)

COND_LIMIT = 1e8
_AREA_EPS = 1e-12


def optimal_placements(q, fallback_a, fallback_b, cond_limit=COND_LIMIT):
    """Batched :func:`optimal_placement` over ``(k, 10)`` coefficient rows."""
    q = np.asarray(q, dtype=float).reshape(-1, 10)
    a = np.asarray(fallback_a, dtype=float).reshape(-1, 3)
    b = np.asarray(fallback_b, dtype=float).reshape(-1, 3)
    A = np.empty((len(q), 3, 3))
    A[:, 0, 0], A[:, 0, 1], A[:, 0, 2] = q[:, 0], q[:, 1], q[:, 2]
    A[:, 1, 1], A[:, 1, 2], A[:, 2, 2] = q[:, 4], q[:, 5], q[:, 7]
    A[:, 1, 0], A[:, 2, 0], A[:, 2, 1] = q[:, 1], q[:, 2], q[:, 5]
    rhs = -q[:, [3, 6, 8]]
    # A is symmetric, so its singular values are the absolute eigenvalues
    ev = np.abs(np.linalg.eigvalsh(A))
    lo, hi = ev.min(axis=1), ev.max(axis=1)
    ok = (hi > 0) & (lo * cond_limit >= hi)
    pos = np.empty_like(a)
    if np.any(ok):
        pos[ok] = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
    bad = ~ok
    if np.any(bad):
        options = np.stack([a[bad], b[bad], 0.5 * (a[bad] + b[bad])], axis=1)
        costs = eval_quadrics(q[bad][:, None, :], options)
        pos[bad] = options[np.arange(len(options)), np.argmin(costs, axis=1)]
    return pos, eval_quadrics(q, pos)


def optimal_placement(q, fallback_a, fallback_b, cond_limit=COND_LIMIT):
    """Point minimizing the quadric ``q`` (coefficients or :class:`QuadricMatrix`).

    Solves ``A x = -b``; when ``A`` is ill-conditioned (condition number
    above ``cond_limit``) the cheapest of ``fallback_a``, ``fallback_b`` and
    their midpoint is used instead. Returns ``(position, cost)``.
    """
    coeffs = np.asarray(getattr(q, "coeffs", q), dtype=float)
    pos, cost = optimal_placements(coeffs, fallback_a, fallback_b, cond_limit)
    return pos[0], float(cost[0])


def _has_boundary(mesh):
    f = np.sort(np.concatenate([mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]]), axis=1)
    _, counts = np.unique(f, axis=0, return_counts=True)
    return bool(np.any(counts == 1))


def boundary_quadrics(mesh, weight=1.0):
    """Per-vertex penalty quadrics for boundary edges (edges with one face)."""
    f = mesh.faces
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    owner = np.tile(np.arange(len(f)), 3)
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    on_boundary = (counts[inv] == 1) & ~mesh.degenerate_faces[owner]
    acc = np.zeros((mesh.n_vertices, 10))
    if not np.any(on_boundary):
        return acc
    be = e[on_boundary]
    fn = mesh.face_planes[owner[on_boundary], :3]
    v0 = mesh.vertices[be[:, 0]]
    d = mesh.vertices[be[:, 1]] - v0
    n = np.cross(d, fn)
    norm = np.linalg.norm(n, axis=1)
    ok = norm > 0
    n = n[ok] / norm[ok, None]
    planes = np.column_stack([n, -(n * v0[ok]).sum(axis=1)])
    q = weight * plane_quadric_coeffs(planes)
    for k in range(2):
        np.add.at(acc, be[ok, k], q)
    return acc


@dataclass
class SimplifyResult:
    """Outcome of :func:`simplify_to`.

    ``collapse_costs`` holds the surface quadric error of each accepted
    collapse (clamped at 0); ``priority_costs`` additionally includes the
    boundary penalty that ordered the queue.
    """

    mesh: TriangleMesh
    complete: bool
    collapse_costs: list = field(default_factory=list)
    priority_costs: list = field(default_factory=list)

    @property
    def total_cost(self):
        return float(sum(self.collapse_costs))

    @property
    def cumulative_costs(self):
        return np.cumsum(self.collapse_costs)


class _Collapser:
    def __init__(self, mesh, boundary_weight, area_weighted):
        self.pos = mesh.vertices.copy()
        # surface quadrics measure geometric error; the boundary penalty only
        # steers ordering and placement
        self.qs = accumulate_vertex_quadrics(mesh, area_weighted).coeffs.copy()
        self.q = self.qs.copy()
        if boundary_weight > 0:
            self.q += boundary_quadrics(mesh, boundary_weight)
        self.faces = [list(map(int, tri)) for tri in mesh.faces]
        self.face_alive = [True] * len(self.faces)
        self.vf = [set() for _ in range(mesh.n_vertices)]
        for i, tri in enumerate(self.faces):
            for v in tri:
                self.vf[v].add(i)
        self.alive = np.zeros(mesh.n_vertices, dtype=bool)
        self.alive[np.unique(mesh.faces)] = True
        self.n_alive = int(self.alive.sum())
        self.n_faces = len(self.faces)
        self.version = [0] * mesh.n_vertices
        self.heap = []
        # link-condition collapses never open a closed surface
        self.open = _has_boundary(mesh)

    def neighbors(self, v):
        out = set()
        for f in self.vf[v]:
            out.update(self.faces[f])
        out.discard(v)
        return out

    def is_boundary_edge(self, a, b):
        return len(self.vf[a] & self.vf[b]) == 1

    def is_boundary_vertex(self, v):
        return any(self.is_boundary_edge(v, n) for n in self.neighbors(v))

    def push(self, pairs):
        if len(pairs) == 0:
            return
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        i, j = pairs[:, 0], pairs[:, 1]
        pos, cost = optimal_placements(self.q[i] + self.q[j], self.pos[i], self.pos[j])
        # shorter edges first among equal costs, so flat regions decimate evenly
        length = ((self.pos[i] - self.pos[j]) ** 2).sum(axis=1)
        for c, l, a, b, p in zip(cost.tolist(), length.tolist(), i.tolist(), j.tolist(), pos.tolist()):
            heapq.heappush(self.heap, (c, l, a, b, self.version[a], self.version[b], tuple(p)))

    def valid(self, a, b, p):
        shared = self.vf[a] & self.vf[b]
        if not shared:
            return False
        opposite = set()
        for f in shared:
            opposite.update(self.faces[f])
        opposite -= {a, b}
        if self.neighbors(a) & self.neighbors(b) != opposite:
            return False
        # edge part of the link condition: no triangle a-x-y alongside b-x-y
        link_a = {frozenset(self.faces[f]) - {a} for f in self.vf[a] - shared}
        if any(frozenset(self.faces[f]) - {b} in link_a for f in self.vf[b] - shared):
            return False
        if self.n_faces - len(shared) < 2:
            return False
        if (self.open and not self.is_boundary_edge(a, b)
                and self.is_boundary_vertex(a) and self.is_boundary_vertex(b)):
            return False

        moved = sorted((self.vf[a] | self.vf[b]) - shared)
        if not moved:
            return True
        tris = np.array([self.faces[f] for f in moved])
        before = self.pos[tris]
        after = before.copy()
        after[(tris == a) | (tris == b)] = p
        n_before = np.cross(before[:, 1] - before[:, 0], before[:, 2] - before[:, 0])
        n_after = np.cross(after[:, 1] - after[:, 0], after[:, 2] - after[:, 0])
        if np.any(0.5 * np.linalg.norm(n_after, axis=1) < _AREA_EPS):
            return False
        solid = 0.5 * np.linalg.norm(n_before, axis=1) >= _AREA_EPS
        return not np.any(solid & ((n_before * n_after).sum(axis=1) < 0.0))

    def collapse(self, a, b, p):
        shared = self.vf[a] & self.vf[b]
        for f in shared:
            self.face_alive[f] = False
            for v in self.faces[f]:
                self.vf[v].discard(f)
        self.n_faces -= len(shared)
        for f in self.vf[b]:
            tri = self.faces[f]
            tri[tri.index(b)] = a
            self.vf[a].add(f)
        self.vf[b] = set()
        self.alive[b] = False
        self.n_alive -= 1
        self.pos[a] = p
        self.q[a] += self.q[b]
        self.qs[a] += self.qs[b]
        self.version[a] += 1
        self.version[b] += 1
        self.push([(a, n) for n in sorted(self.neighbors(a))])

    def result(self):
        keep = np.flatnonzero(self.alive)
        remap = np.full(len(self.alive), -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        faces = np.array([self.faces[i] for i, ok in enumerate(self.face_alive) if ok], dtype=np.int64)
        return TriangleMesh(self.pos[keep], remap[faces.reshape(-1, 3)])


def simplify_to(mesh, target_vertices, boundary_weight=1.0, area_weighted=False):
    """Collapse edges of ``mesh`` until at most ``target_vertices`` remain.

    Returns a :class:`SimplifyResult`; ``complete`` is False when no valid
    collapse was left before reaching the target (the partial mesh is kept).
    """
    if target_vertices < 4:
        raise TargetTooSmall(f"target_vertices must be >= 4, got {target_vertices}")
    mesh = mesh.compact()
    state = _Collapser(mesh, boundary_weight, area_weighted)
    costs, priorities = [], []
    if state.n_alive <= target_vertices:
        return SimplifyResult(mesh, True, costs, priorities)
    state.push(mesh.edges)
    while state.n_alive > target_vertices and state.heap:
        cost, _, a, b, va, vb, p = heapq.heappop(state.heap)
        if not (state.alive[a] and state.alive[b]) or state.version[a] != va or state.version[b] != vb:
            continue
        p = np.array(p)
        if not state.valid(a, b, p):
            continue
        error = float(eval_quadrics(state.qs[a] + state.qs[b], p))
        state.collapse(a, b, p)
        costs.append(max(error, 0.0))
        priorities.append(max(cost, 0.0))
    complete = state.n_alive <= target_vertices
    if not complete:
        log.warning("simplify_to stopped at %d vertices (target %d): no valid collapse left",
                    state.n_alive, target_vertices)
    return SimplifyResult(state.result(), complete, costs, priorities)
