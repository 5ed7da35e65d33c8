import json
import math

import numpy as np
import pytest

from minksob.errors import InsufficientNeighbors, NonSpacelikeSimplex, WrongCodimension
from minksob.generators import build_surface, parse_surface_spec
from minksob.lorentz import boost, mink_inner, rotation
from minksob.mesh import (
    SpacelikeMesh, hessian_identity_check, induced_metric, is_mean_convex, maximal_slope,
)

from conftest import surface

TRI = np.array([[0, 1, 2]])


def test_induced_metric_identity():
    mesh = SpacelikeMesh([[0, 0, 0], [0, 1, 0], [0, 0, 1]], TRI)
    np.testing.assert_allclose(induced_metric(mesh, 0), np.eye(2))


def test_lightlike_edge_rejected():
    with pytest.raises(NonSpacelikeSimplex):
        SpacelikeMesh([[0, 0, 0], [1, 1, 0], [0, 0, 1]], TRI)


def test_induced_metric_tilted_graph():
    mesh = SpacelikeMesh([[0, 0, 0], [0.5, 1, 0], [0, 0, 1]], TRI)
    np.testing.assert_allclose(induced_metric(mesh, 0), np.diag([0.75, 1.0]))


@pytest.mark.parametrize("text", ["flat_disk", "hyperboloid_cap", "tilted_disk", "codim_disk:eps=0.3,delta=0.2",
                                  "cylinder", "random_graph:seed=3"])
def test_gram_positive_and_frame_invariants(text):
    mesh = surface(text, 0.1)
    assert np.linalg.eigvalsh(mesh.gram).min() > 0
    fr = mesh.frame
    np.testing.assert_allclose(mink_inner(fr.nu, fr.nu), -1, atol=1e-8)
    assert np.all(fr.nu[:, 0] <= -1 + 1e-8)
    np.testing.assert_allclose(mink_inner(fr.tangent, fr.nu[:, None]), 0, atol=1e-8)
    if mesh.m < mesh.n:
        E = fr.spacelike_normals
        np.testing.assert_allclose(mink_inner(E, E), 1, atol=1e-8)
        np.testing.assert_allclose(mink_inner(E, fr.nu[:, None]), 0, atol=1e-8)
        np.testing.assert_allclose(mink_inner(E[:, :, None], fr.tangent[:, None]), 0, atol=1e-8)


def test_boundary_is_once_shared(flat):
    F = flat.boundary_facets
    assert len(F) > 0
    assert set(np.unique(F)) == set(np.flatnonzero(flat.is_boundary))


def test_conormals_unit_tangent_outward(flat):
    for v, eta in flat.boundary_conormals.items():
        assert mink_inner(eta, eta) == pytest.approx(1, abs=1e-8)
        assert abs(mink_inner(eta, flat.frame.nu[v])) < 1e-8
        assert eta[1:] @ flat.vertices[v, 1:] > 0


def test_flat_disk_frame_and_curvature(flat):
    np.testing.assert_allclose(flat.frame.nu, np.tile([-1.0, 0, 0], (flat.n_vertices, 1)), atol=1e-12)
    assert np.abs(flat.curvature.h).max() < 1e-10
    assert maximal_slope(flat) == 1.0


def test_hyperboloid_frame_is_minus_X(cap):
    np.testing.assert_allclose(cap.frame.nu, -cap.vertices, atol=1e-2)
    assert maximal_slope(cap) == pytest.approx(math.cosh(1), rel=0.01)


def test_tilted_plane_slope():
    mesh = surface("tilted_disk:k=0.5", 0.1)
    assert maximal_slope(mesh) == pytest.approx(1 / math.sqrt(0.75), rel=1e-10)


def test_circle_frame_in_codimension_three():
    k = 40
    th = 2 * np.pi * np.arange(k) / k
    V = np.zeros((k, 4))
    V[:, 1], V[:, 2] = np.cos(th), np.sin(th)
    mesh = SpacelikeMesh(V, np.stack([np.arange(k), (np.arange(k) + 1) % k], 1))
    fr = mesh.frame
    np.testing.assert_allclose(fr.nu, np.tile([-1.0, 0, 0, 0], (k, 1)), atol=1e-10)
    radial = np.abs(np.einsum("vai,vi->va", fr.spacelike_normals, V))
    np.testing.assert_allclose(radial.max(axis=1), 1, atol=1e-8)


def test_hyperboloid_H_matches_oracle_and_converges():
    errs = []
    for h in (0.1, 0.05):
        mesh = surface("hyperboloid_cap", h)
        errs.append(np.abs(mesh.curvature.H + 2 * mesh.vertices).max())
    assert errs[1] < 0.05
    # halved within a factor 1.5 of the expected reduction
    assert errs[0] / errs[1] >= 2 / 1.5


def test_cylinder_H_spacelike():
    mesh = surface("cylinder", 0.1)
    curv = mesh.curvature
    inner = ~mesh.is_boundary
    H = curv.H[inner]
    np.testing.assert_allclose(mink_inner(H, H), 1, atol=0.05)
    assert np.abs(curv.H_perp2[inner]).max() < 1e-8


def test_h_symmetric_and_H_split(cap):
    curv = cap.curvature
    np.testing.assert_allclose(curv.h, np.swapaxes(curv.h, 1, 2), atol=1e-12)
    np.testing.assert_allclose(curv.H_perp1 + curv.H_perp2, curv.H, atol=1e-12)
    np.testing.assert_allclose(mink_inner(curv.H_perp1, cap.frame.nu), 0, atol=1e-10)


@pytest.mark.parametrize("text, expected", [
    ("flat_disk", True),
    ("hyperboloid_cap", True),
    ("spacelike_graph:eps=0.3,w=2", False),
])
def test_is_mean_convex(text, expected):
    assert is_mean_convex(surface(text, 0.1)) is expected


def test_mean_convex_needs_hypersurface(codim):
    with pytest.raises(WrongCodimension):
        is_mean_convex(codim)


def test_insufficient_neighbors():
    mesh = SpacelikeMesh([[0, 0, 0], [0, 1, 0], [0, 0, 1]], TRI)
    with pytest.raises(InsufficientNeighbors):
        mesh.curvature


def test_slope_rotation_invariant_and_boost():
    mesh = surface("random_graph:seed=5", 0.1)
    R = rotation(2, 0.9)
    assert maximal_slope(mesh.transformed(R)) == pytest.approx(maximal_slope(mesh), rel=1e-10)
    flat = surface("flat_disk", 0.1)
    for v in (0.3, 0.6):
        assert maximal_slope(flat.transformed(boost(2, v))) == pytest.approx(1 / math.sqrt(1 - v * v), rel=0.01)


def _x0():
    return (lambda V: V[:, 0], lambda V: np.tile([1.0, 0, 0], (len(V), 1)), lambda V: np.zeros((len(V), 3, 3)))


def _half_norm():
    return (lambda V: 0.5 * mink_inner(V, V), lambda V: V * np.array([-1.0, 1, 1]),
            lambda V: np.tile(np.diag([-1.0, 1, 1]), (len(V), 1, 1)))


def test_hessian_identity_flat_quadratic(flat):
    w = (lambda V: V[:, 1] ** 2, lambda V: np.stack([0 * V[:, 0], 2 * V[:, 1], 0 * V[:, 0]], 1),
         lambda V: np.tile(np.diag([0.0, 2, 0]), (len(V), 1, 1)))
    assert hessian_identity_check(flat, *w) < 1e-8


def test_hessian_identity_on_cap_refines():
    e = [hessian_identity_check(surface("hyperboloid_cap", h), *_half_norm()) for h in (0.1, 0.05)]
    assert e[1] < e[0] < 0.05
    assert hessian_identity_check(surface("hyperboloid_cap", 0.05), *_x0()) < 1e-10


def test_json_round_trip(tmp_path, cap):
    path = tmp_path / "mesh.json"
    cap.save(path)
    data = json.loads(path.read_text())
    assert set(data) == {"n", "m", "vertices", "simplices"}
    back = SpacelikeMesh.load(path)
    assert np.array_equal(back.vertices, cap.vertices)
    assert np.array_equal(back.simplices, cap.simplices)
