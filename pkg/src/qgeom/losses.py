"""Reconstruction losses with analytic per-point gradients.

Every loss is evaluated with its correspondences held fixed; gradients are
those of the resulting piecewise-smooth function. Correspondences are
refreshed by the caller between optimizer steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels, num_threads
from .errors import EmptyInput, EmptyNeighborhood, NoCandidateTriangles, SizeMismatch
from .mesh_core import TriangleMesh, vertex_normals
from .quadrics import eval_quadrics, quadric_gradients, vertex_quadrics
from .spatial_index import SpatialIndex, correspondences

LOSS_NAMES = ("chamfer", "quadric", "normal", "surface")


@dataclass
class LossValue:
    """Scalar loss and its gradient with respect to each output point."""

    name: str
    scalar: float
    gradient: np.ndarray
    components: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"loss_name": self.name, "scalar": self.scalar,
                "components": {k: float(v) for k, v in self.components.items()}}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class LossWeights:
    chamfer: float = 1.0
    quadric: float = 0.0
    normal: float = 0.0
    surface: float = 0.0

    def __post_init__(self):
        vals = self.as_dict()
        if any(v < 0 or not np.isfinite(v) for v in vals.values()):
            raise ValueError(f"loss weights must be finite and non-negative: {vals}")
        if not any(v > 0 for v in vals.values()):
            raise ValueError("at least one loss weight must be positive")

    def as_dict(self):
        return {name: float(getattr(self, name)) for name in LOSS_NAMES}

    @classmethod
    def from_preset(cls, preset):
        """Weights for presets such as ``"chamfer"`` or ``"chamfer+quadric"``.

        Every named term gets weight 1.
        """
        names = [p.strip() for p in preset.split("+")]
        unknown = set(names) - set(LOSS_NAMES)
        if unknown or not names:
            raise ValueError(f"unknown preset {preset!r}")
        return cls(**{n: (1.0 if n in names else 0.0) for n in LOSS_NAMES})


@dataclass(frozen=True, eq=False)
class TargetBundle:
    """Ground-truth data precomputed once per target mesh."""

    mesh: TriangleMesh
    quadrics: np.ndarray
    normals: np.ndarray
    neighbors: tuple
    candidate_faces: tuple
    index: SpatialIndex

    @property
    def vertices(self):
        return self.mesh.vertices


def _nondegenerate_incidence(mesh):
    off, ids = mesh.vertex_faces
    keep = ~mesh.degenerate_faces[ids]
    owner = np.repeat(np.arange(mesh.n_vertices), np.diff(off))[keep]
    counts = np.bincount(owner, minlength=mesh.n_vertices)
    return np.concatenate([[0], np.cumsum(counts)]), ids[keep]


def prepare_target(mesh, area_weighted=False):
    """Precompute quadrics, normals, 1-rings and incident faces for ``mesh``."""
    mesh = mesh.compact()
    return TargetBundle(
        mesh=mesh,
        quadrics=vertex_quadrics(mesh, area_weighted).coeffs,
        normals=vertex_normals(mesh),
        neighbors=mesh.vertex_neighbors,
        candidate_faces=_nondegenerate_incidence(mesh),
        index=SpatialIndex(mesh.vertices),
    )


def _to_csr(lists):
    if isinstance(lists, tuple) and len(lists) == 2:
        return np.asarray(lists[0], dtype=np.int64), np.asarray(lists[1], dtype=np.int64)
    counts = [len(x) for x in lists]
    off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    ids = np.concatenate([np.asarray(x, dtype=np.int64) for x in lists]) if lists else np.zeros(0, np.int64)
    return off, ids.astype(np.int64)


def _gather_csr(offsets, ids, rows):
    """Sub-CSR holding the lists of ``rows`` (in order)."""
    starts = offsets[rows]
    counts = offsets[rows + 1] - starts
    new_off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    local = np.arange(new_off[-1]) - np.repeat(new_off[:-1], counts)
    return new_off, ids[np.repeat(starts, counts) + local]


def _points(output):
    pts = np.asarray(output, dtype=float)
    if pts.size == 0:
        raise EmptyInput("output cloud is empty")
    return pts.reshape(-1, 3)


def _check_corr(corr, n_out, n_in):
    o2i = np.asarray(corr.out_to_in)
    if len(o2i) != n_out:
        raise SizeMismatch(f"correspondence covers {len(o2i)} points, output has {n_out}")
    if len(o2i) and (o2i.min() < 0 or o2i.max() >= n_in):
        raise SizeMismatch(f"correspondence index out of range for {n_in} input vertices")
    return o2i


def quadric_loss(output, vertex_quadrics, corr):
    """Mean of ``s^T Q_t s`` over output points ``s`` matched to input vertex ``t``."""
    s = _points(output)
    q = np.asarray(getattr(vertex_quadrics, "coeffs", vertex_quadrics), dtype=float)
    o2i = _check_corr(corr, len(s), len(q))
    n = len(s)
    qt = q[o2i]
    per_point = eval_quadrics(qt, s)
    grad = quadric_gradients(qt, s) / n
    return LossValue("quadric", float(per_point.sum() / n), grad,
                     details={"per_point": per_point})


def chamfer_loss(output, input_vertices, corr=None):
    """Bidirectional mean squared nearest-neighbour distance."""
    s = _points(output)
    t = np.asarray(input_vertices, dtype=float).reshape(-1, 3)
    if len(t) == 0:
        raise EmptyInput("input cloud is empty")
    if corr is None:
        corr = correspondences(s, t)
    o2i = _check_corr(corr, len(s), len(t))
    i2o = np.asarray(corr.in_to_out)
    if len(i2o) != len(t):
        raise SizeMismatch(f"reverse correspondence covers {len(i2o)} points, input has {len(t)}")
    fwd = s - t[o2i]
    bwd = s[i2o] - t
    fwd_sq = (fwd * fwd).sum(axis=1)
    bwd_sq = (bwd * bwd).sum(axis=1)
    scalar = fwd_sq.sum() / len(s) + bwd_sq.sum() / len(t)
    grad = (2.0 / len(s)) * fwd
    np.add.at(grad, i2o, (2.0 / len(t)) * bwd)
    return LossValue("chamfer", float(scalar), grad,
                     details={"forward": float(fwd_sq.mean()), "backward": float(bwd_sq.mean())})


def normal_loss(output, input_vertices, input_normals, neighbor_lists, corr, mode="squared"):
    """Penalize edges from each output point to its match's 1-ring that leave the tangent plane.

    ``mode="squared"`` averages ``<s - x_i, n_t>^2`` over the 1-ring;
    ``mode="absolute"`` uses ``|<s - x_i, n_t>|`` instead.
    """
    if mode not in ("squared", "absolute"):
        raise ValueError(f"unknown normal loss mode {mode!r}")
    s = _points(output)
    x = np.asarray(input_vertices, dtype=float).reshape(-1, 3)
    normals = np.asarray(input_normals, dtype=float).reshape(-1, 3)
    o2i = _check_corr(corr, len(s), len(x))
    off, ids = _to_csr(neighbor_lists)
    ring = np.diff(off)[o2i]
    if np.any(ring == 0):
        bad = int(o2i[np.argmax(ring == 0)])
        raise EmptyNeighborhood(f"input vertex {bad} has no neighbours")
    sub_off, nbr = _gather_csr(off, ids, o2i)
    owner = np.repeat(np.arange(len(s)), ring)
    nrm = normals[o2i][owner]
    edge = s[owner] - x[nbr]
    inner = (edge * nrm).sum(axis=1)
    n = len(s)
    weight = 1.0 / (n * ring[owner])
    if mode == "squared":
        scalar = float((weight * inner * inner).sum())
        pair_grad = (2.0 * weight * inner)[:, None] * nrm
    else:
        scalar = float((weight * np.abs(inner)).sum())
        pair_grad = (weight * np.sign(inner))[:, None] * nrm
    grad = np.zeros_like(s)
    np.add.at(grad, owner, pair_grad)
    return LossValue("normal", scalar, grad)


def surface_loss(output, mesh, corr, candidate_faces=None):
    """Mean squared distance to the nearest triangle incident to each match.

    ``candidate_faces`` is an optional CSR ``(offsets, face_ids)`` per input
    vertex; by default every non-degenerate incident face is a candidate.
    """
    s = _points(output)
    o2i = _check_corr(corr, len(s), mesh.n_vertices)
    if candidate_faces is None:
        candidate_faces = _nondegenerate_incidence(mesh)
    off, ids = candidate_faces
    sub_off, cand = _gather_csr(np.asarray(off), np.asarray(ids), o2i)
    empty = np.diff(sub_off) == 0
    if np.any(empty):
        bad = int(o2i[np.argmax(empty)])
        raise NoCandidateTriangles(f"input vertex {bad} has no incident triangles")
    sqd, face, closest, region = kernels.nearest_candidate(
        s, mesh.vertices, mesh.faces, sub_off, cand, num_threads())
    n = len(s)
    grad = (2.0 / n) * (s - closest)
    return LossValue("surface", float(sqd.sum() / n), grad,
                     details={"face": face, "region": region, "closest": closest})


def component_loss(name, output, bundle, corr):
    if name == "chamfer":
        return chamfer_loss(output, bundle.vertices, corr)
    if name == "quadric":
        return quadric_loss(output, bundle.quadrics, corr)
    if name == "normal":
        return normal_loss(output, bundle.vertices, bundle.normals, bundle.neighbors, corr)
    if name == "surface":
        return surface_loss(output, bundle.mesh, corr, bundle.candidate_faces)
    raise ValueError(f"unknown loss {name!r}")


def combined_loss(output, bundle, weights, corr=None, diagnostics=False):
    """Weighted sum of the enabled losses.

    Correspondences are computed from the current ``output`` unless given.
    With ``diagnostics`` the scalars of zero-weight losses are reported in
    ``components`` too (they do not enter the total).
    """
    s = _points(output)
    if corr is None:
        corr = correspondences(s, bundle.vertices, bundle.index)
    w = weights.as_dict()
    total = 0.0
    grad = np.zeros_like(s)
    components = {}
    for name in LOSS_NAMES:
        if w[name] > 0:
            value = component_loss(name, s, bundle, corr)
            components[name] = value.scalar
            total = total + w[name] * value.scalar
            grad += w[name] * value.gradient
        elif diagnostics:
            components[name] = component_loss(name, s, bundle, corr).scalar
    label = "+".join(n for n in LOSS_NAMES if w[n] > 0)
    return LossValue(label, float(total), grad, components, details={"corr": corr})
