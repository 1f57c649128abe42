import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import (
    chamfer_brute,
    numeric_gradient,
    point_mesh_brute,
    point_triangle_exact,
    point_triangle_lattice,
)
from qgeom import shapes
from qgeom.errors import EmptyNeighborhood, NoCandidateTriangles, SizeMismatch
from qgeom.losses import (
    LossWeights,
    chamfer_loss,
    combined_loss,
    normal_loss,
    prepare_target,
    quadric_loss,
    surface_loss,
)
from qgeom.mesh_core import TriangleMesh
from qgeom.spatial_index import CorrespondenceMap, correspondences

A = np.array([0.0, 0, 0])
B = np.array([1.0, 0, 0])
C = np.array([0.0, 1, 0])

REGION_POINTS = [
    ((0.2, 0.2, 0.5), 0, (0.2, 0.2, 0.0)),
    ((0.5, -1.0, 0.3), 1, (0.5, 0.0, 0.0)),
    ((1.0, 1.0, 0.2), 2, (0.5, 0.5, 0.0)),
    ((-1.0, 0.5, 0.0), 3, (0.0, 0.5, 0.0)),
    ((-1.0, -1.0, 0.0), 4, (0.0, 0.0, 0.0)),
    ((2.0, -0.5, 0.0), 5, (1.0, 0.0, 0.0)),
    ((-0.5, 2.0, 0.0), 6, (0.0, 1.0, 0.0)),
]


def test_seven_regions(kernels):
    p = np.array([r[0] for r in REGION_POINTS])
    n = len(p)
    sqd, closest, region = kernels.point_triangle_batch(p, np.tile(A, (n, 1)), np.tile(B, (n, 1)),
                                                        np.tile(C, (n, 1)))
    assert region.tolist() == [r[1] for r in REGION_POINTS]
    assert np.allclose(closest, [r[2] for r in REGION_POINTS])
    assert np.allclose(sqd, ((p - closest) ** 2).sum(1))


def test_point_triangle_against_exact_oracle(kernels, rng):
    n = 400
    tri = rng.normal(size=(3, n, 3))
    p = rng.normal(size=(n, 3)) * 2
    sqd, closest, region = kernels.point_triangle_batch(p, *tri)
    ref = np.array([point_triangle_exact(p[i], tri[0, i], tri[1, i], tri[2, i]) for i in range(n)])
    assert np.allclose(sqd, ref, rtol=1e-9, atol=1e-12)
    assert set(region.tolist()) == set(range(7))


def test_point_triangle_against_lattice(kernels, rng):
    for _ in range(20):
        a, b, c = rng.normal(size=(3, 3))
        p = rng.normal(size=(1, 3))
        sqd, _, _ = kernels.point_triangle_batch(p, a[None], b[None], c[None])
        lattice = point_triangle_lattice(p[0], a, b, c)
        assert abs(np.sqrt(lattice) - np.sqrt(sqd[0])) < 1e-2
        assert sqd[0] <= lattice + 1e-12


def test_backends_agree_bitwise(rng):
    from conftest import BACKENDS
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    py, cy = (b.values[0] for b in BACKENDS)
    tri = rng.normal(size=(3, 1000, 3))
    p = rng.normal(size=(1000, 3))
    for x, y in zip(py.point_triangle_batch(p, *tri), cy.point_triangle_batch(p, *tri)):
        assert np.array_equal(x, y)
    mesh = shapes.icosphere(2)
    q = rng.normal(size=(300, 3))
    for x, y in zip(py.TriangleBVH(mesh.vertices, mesh.faces).query(q),
                    cy.TriangleBVH(mesh.vertices, mesh.faces).query(q)):
        assert np.array_equal(x, y)


def test_bvh_matches_brute_force(kernels, rng):
    mesh = shapes.cad_like(2)
    q = rng.normal(size=(200, 3)) * 2
    sqd, face, closest = kernels.TriangleBVH(mesh.vertices, mesh.faces).query(q, 1)
    ref = point_mesh_brute(q, mesh.vertices, mesh.faces)
    assert np.allclose(np.sqrt(sqd), ref, rtol=0, atol=1e-9)
    tri = mesh.vertices[mesh.faces[face]]
    again, _, _ = kernels.point_triangle_batch(q, tri[:, 0], tri[:, 1], tri[:, 2])
    assert np.array_equal(again, sqd)


def test_nearest_candidate(kernels, rng):
    mesh = shapes.icosphere(1)
    n = 50
    p = rng.normal(size=(n, 3))
    lists = [rng.choice(mesh.n_faces, size=rng.integers(1, 6), replace=False) for _ in range(n)]
    lists[3] = np.array([], dtype=np.int64)
    off = np.concatenate([[0], np.cumsum([len(x) for x in lists])])
    cand = np.concatenate(lists).astype(np.int64)
    sqd, face, _, _ = kernels.nearest_candidate(p, mesh.vertices, mesh.faces, off, cand, 1)
    for i in range(n):
        if len(lists[i]) == 0:
            assert face[i] == -1 and np.isinf(sqd[i])
            continue
        d = [point_triangle_exact(p[i], *mesh.vertices[mesh.faces[f]]) for f in lists[i]]
        assert sqd[i] == pytest.approx(min(d), rel=1e-9, abs=1e-12)
        assert face[i] in lists[i]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
              elements=st.floats(-5, 5, allow_nan=False, width=32)),
       arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
              elements=st.floats(-5, 5, allow_nan=False, width=32)))
def test_chamfer_matches_brute_force(a, b):
    assert chamfer_loss(a, b).scalar == pytest.approx(chamfer_brute(a, b), rel=1e-12, abs=1e-12)


def test_chamfer_closed_forms(rng):
    pts = rng.normal(size=(40, 3))
    assert chamfer_loss(pts, pts).scalar == 0.0
    # one point against a cloud: forward term is its NN distance, backward the mean
    single = np.zeros((1, 3))
    cloud = np.array([[1.0, 0, 0], [0, 2.0, 0]])
    assert chamfer_loss(single, cloud).scalar == pytest.approx(1.0 + 2.5)


def _planar_bundle():
    return prepare_target(shapes.grid(6))


def test_quadric_loss_closed_form():
    bundle = _planar_bundle()
    off, _ = bundle.mesh.vertex_faces
    k = np.diff(off)
    pts = bundle.vertices + np.array([0.0, 0.0, 0.1])
    corr = correspondences(pts, bundle.vertices)
    assert quadric_loss(pts, bundle.quadrics, corr).scalar == pytest.approx((k * 0.01).mean())


def test_normal_loss_closed_form():
    bundle = _planar_bundle()
    pts = bundle.vertices + np.array([0.0, 0.0, 0.1])
    corr = correspondences(pts, bundle.vertices)
    value = normal_loss(pts, bundle.vertices, bundle.normals, bundle.neighbors, corr)
    assert value.scalar == pytest.approx(0.01)
    absolute = normal_loss(pts, bundle.vertices, bundle.normals, bundle.neighbors, corr, "absolute")
    assert absolute.scalar == pytest.approx(0.1)


def test_surface_loss_zero_on_surface_and_plane_distance():
    bundle = prepare_target(shapes.subdivided_cube(3))
    pts = bundle.vertices.copy()
    corr = correspondences(pts, bundle.vertices)
    assert surface_loss(pts, bundle.mesh, corr).scalar == 0.0
    grid = _planar_bundle()
    lifted = grid.vertices + np.array([0, 0, -0.2])
    corr = correspondences(lifted, grid.vertices)
    assert surface_loss(lifted, grid.mesh, corr).scalar == pytest.approx(0.04)


def _frozen_check(fn, pts):
    analytic = fn(pts).gradient
    numeric = numeric_gradient(lambda x: fn(x).scalar, pts.copy())
    err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
    assert err < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_gradients_finite_differences(seed):
    rng = np.random.default_rng(seed)
    bundle = prepare_target(shapes.cad_like(seed))
    pts = bundle.vertices[rng.integers(0, len(bundle.vertices), 12)] + rng.normal(0, 0.05, (12, 3))
    corr = correspondences(pts, bundle.vertices)
    _frozen_check(lambda x: chamfer_loss(x, bundle.vertices, corr), pts)
    _frozen_check(lambda x: quadric_loss(x, bundle.quadrics, corr), pts)
    _frozen_check(lambda x: normal_loss(x, bundle.vertices, bundle.normals, bundle.neighbors, corr), pts)
    _frozen_check(lambda x: surface_loss(x, bundle.mesh, corr, bundle.candidate_faces), pts)


def test_combined_loss_weights_and_diagnostics(rng):
    bundle = prepare_target(shapes.cube())
    pts = rng.uniform(size=(20, 3))
    w = LossWeights(chamfer=1.0, quadric=2.0)
    value = combined_loss(pts, bundle, w)
    corr = correspondences(pts, bundle.vertices)
    ch = chamfer_loss(pts, bundle.vertices, corr)
    qu = quadric_loss(pts, bundle.quadrics, corr)
    assert value.scalar == pytest.approx(ch.scalar + 2 * qu.scalar)
    assert np.allclose(value.gradient, ch.gradient + 2 * qu.gradient)
    assert set(value.components) == {"chamfer", "quadric"}
    diag = combined_loss(pts, bundle, w, diagnostics=True)
    assert set(diag.components) == {"chamfer", "quadric", "normal", "surface"}
    assert diag.scalar == value.scalar
    payload = json.loads(diag.to_json())
    assert payload["loss_name"] == "chamfer+quadric"
    assert set(payload) == {"loss_name", "scalar", "components"}


def test_weights_validation_and_presets():
    assert LossWeights.from_preset("chamfer+quadric").as_dict() == {
        "chamfer": 1.0, "quadric": 1.0, "normal": 0.0, "surface": 0.0}
    with pytest.raises(ValueError):
        LossWeights.from_preset("chamfer+bogus")
    with pytest.raises(ValueError):
        LossWeights(chamfer=0.0)
    with pytest.raises(ValueError):
        LossWeights(chamfer=-1.0)


def test_error_cases():
    bundle = prepare_target(shapes.cube())
    pts = np.zeros((3, 3))
    bad = CorrespondenceMap(np.array([0, 1]), np.zeros(8, dtype=np.int64))
    with pytest.raises(SizeMismatch):
        quadric_loss(pts, bundle.quadrics, bad)
    out_of_range = CorrespondenceMap(np.array([0, 1, 99]), np.zeros(8, dtype=np.int64))
    with pytest.raises(SizeMismatch):
        quadric_loss(pts, bundle.quadrics, out_of_range)
    corr = CorrespondenceMap(np.array([0, 1, 2]), np.zeros(8, dtype=np.int64))
    with pytest.raises(EmptyNeighborhood):
        normal_loss(pts, bundle.vertices, bundle.normals, [[1], [], [0]], corr)
    mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]])
    corr = CorrespondenceMap(np.array([3, 3, 3]), np.zeros(4, dtype=np.int64))
    with pytest.raises(NoCandidateTriangles):
        surface_loss(pts, mesh, corr)


def test_point_triangle_worked_examples(kernels):
    tri = [A[None], B[None], C[None]]
    sqd, closest, region = kernels.point_triangle_batch(np.array([[2.0, 0, 0]]), *tri)
    assert sqd[0] == 1.0 and region[0] == 5 and np.allclose(closest, [1, 0, 0])
    sqd, closest, region = kernels.point_triangle_batch(np.array([[0.5, -1.0, 0]]), *tri)
    assert sqd[0] == 1.0 and region[0] == 1 and np.allclose(closest, [0.5, 0, 0])
    mesh = TriangleMesh([A, B, C], [[0, 1, 2]])
    corr = CorrespondenceMap(np.array([0]), np.zeros(3, dtype=np.int64))
    assert surface_loss([[0.25, 0.25, 3.0]], mesh, corr).scalar == pytest.approx(9.0)


def test_chamfer_worked_example_and_symmetry(rng):
    assert chamfer_loss([[0.0, 0, 0]], [[1.0, 0, 0]]).scalar == 2.0
    a = rng.normal(size=(30, 3))
    b = rng.normal(size=(30, 3))
    assert chamfer_loss(a, b).scalar == pytest.approx(chamfer_loss(b, a).scalar, rel=1e-12)


def test_plane_distance_bounds_triangle_distance(kernels, rng):
    mesh = shapes.cad_like(6)
    p = rng.normal(size=(200, 3))
    faces = rng.integers(0, mesh.n_faces, 200)
    tri = mesh.vertices[mesh.faces[faces]]
    sqd, _, _ = kernels.point_triangle_batch(p, tri[:, 0], tri[:, 1], tri[:, 2])
    plane = mesh.face_planes[faces]
    plane_sq = ((p * plane[:, :3]).sum(1) + plane[:, 3]) ** 2
    assert np.all(plane_sq <= sqd + 1e-9)


def test_ellipsoidal_versus_spherical():
    bundle = prepare_target(shapes.grid(5))
    v = 12
    corr = CorrespondenceMap(np.array([v]), np.zeros(25, dtype=np.int64))
    delta = 0.05
    normal = bundle.vertices[v] + [0, 0, delta]
    tangent = bundle.vertices[v] + [delta, 0, 0]
    assert quadric_loss([normal], bundle.quadrics, corr).scalar == pytest.approx(6 * delta ** 2)
    assert quadric_loss([tangent], bundle.quadrics, corr).scalar == 0.0
    l2 = [float(((p - bundle.vertices[v]) ** 2).sum()) for p in (normal, tangent)]
    assert l2[0] == pytest.approx(l2[1])


def test_normal_loss_matches_direct_sum(rng):
    bundle = prepare_target(shapes.cad_like(1))
    pts = rng.normal(size=(15, 3))
    corr = correspondences(pts, bundle.vertices)
    off, nbr = bundle.neighbors
    expected = 0.0
    for i, s in enumerate(pts):
        t = corr.out_to_in[i]
        ring = nbr[off[t]:off[t + 1]]
        expected += sum(np.dot(s - bundle.vertices[x], bundle.normals[t]) ** 2 for x in ring) / len(ring)
    expected /= len(pts)
    value = normal_loss(pts, bundle.vertices, bundle.normals, bundle.neighbors, corr)
    assert value.scalar == pytest.approx(expected, rel=1e-9)
    assert value.gradient.shape == pts.shape


def test_combined_single_weight_equals_component(rng):
    bundle = prepare_target(shapes.cube())
    pts = rng.uniform(size=(10, 3))
    assert combined_loss(pts, bundle, LossWeights()).scalar == chamfer_loss(pts, bundle.vertices).scalar
    assert combined_loss(bundle.vertices, bundle, LossWeights(chamfer=0, quadric=1)).scalar < 1e-12
