"""Level-set geometry: evaluation, normals, curvature, roots and element
classification, including the grazing-contact regressions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from cutflow.levelset import (CUT, MINUS, PLUS, LevelSetGeometry, classify)
from cutflow.mesh import build_mesh


def test_circle_sign_convention():
    geom = LevelSetGeometry.circle((0.5, 0.5), 0.23)
    assert geom.eval((0.5, 0.5)) < 0
    assert geom.eval((0.9, 0.9)) > 0
    assert abs(geom.eval((0.73, 0.5))) < 1e-14


def test_circle_matches_degenerate_ellipse():
    circ = LevelSetGeometry.circle((0.4, 0.6), 0.2)
    elli = LevelSetGeometry.ellipse((0.4, 0.6), (0.2, 0.2))
    pts = np.array([[0.45, 0.61], [0.2, 0.6], [0.4, 0.8]])
    # Evaluation formulas differ by a positive factor; geometric outputs agree.
    assert np.all(np.sign(circ.eval(pts)) == np.sign(elli.eval(pts)))
    on = circ.project(pts)
    nc, kc = circ.normal_curvature(on)
    ne, ke = elli.normal_curvature(on)
    assert np.allclose(nc, ne, atol=1e-12)
    assert np.allclose(kc, ke, atol=1e-12)
    assert np.allclose(kc, -1.0 / 0.2, atol=1e-12)


def test_ellipse_vertex_curvature():
    # At the end of the major axis the curvature magnitude is a1/a2^2.
    a1, a2 = 0.3537, 0.2037
    geom = LevelSetGeometry.ellipse((0.5, 0.5), (a1, a2))
    _, kappa = geom.normal_curvature((0.5 + a1, 0.5))
    assert abs(kappa + a1 / a2 ** 2) < 1e-12
    assert abs(kappa + 8.5245) < 5e-4


def test_normal_is_unit_and_outward():
    geom = LevelSetGeometry.ellipse((0.5, 0.5), (0.3, 0.2))
    theta = np.linspace(0, 2 * np.pi, 17)
    pts = np.column_stack([0.5 + 0.3 * np.cos(theta), 0.5 + 0.2 * np.sin(theta)])
    n, _ = geom.normal_curvature(pts)
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-13)
    # Stepping along the normal leaves the inner region.
    assert np.all(geom.eval(pts + 1e-6 * n) > 0)
    assert np.all(geom.eval(pts - 1e-6 * n) < 0)


def test_project_lands_on_interface():
    geom = LevelSetGeometry.ellipse((0.5, 0.5), (0.31, 0.17))
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.1, 0.9, size=(50, 2))
    proj = geom.project(pts)
    assert np.max(np.abs(geom.eval(proj))) < 1e-13


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95),
       st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_edge_roots_against_bisection(x0, y0, x1, y1):
    geom = LevelSetGeometry.ellipse((0.5, 0.5), (0.28, 0.19))
    p0 = np.array([x0, y0])
    p1 = np.array([x1, y1])
    roots = geom.edge_roots(p0, p1)
    f = lambda t: geom.eval(p0 + t * (p1 - p0))
    for t in roots:
        assert abs(f(t)) < 1e-9
    # Every sign change found by a fine scan must be matched by a root.
    ts = np.linspace(0.0, 1.0, 200)
    vals = f(ts[:, None] * (p1 - p0) + p0) if False else np.array([f(t) for t in ts])
    for k in range(199):
        if vals[k] * vals[k + 1] < 0:
            tstar = brentq(f, ts[k], ts[k + 1])
            assert min(abs(tstar - t) for t in roots) < 1e-9


def test_classify_partitions_all_elements():
    mesh = build_mesh(16)
    geom = LevelSetGeometry.circle((0.5, 0.5), 0.23)
    cls = classify(mesh, geom)
    c = cls.counts()
    assert c["plus"] + c["minus"] + c["cut"] == mesh.num_triangles
    assert c["cut"] > 0 and c["minus"] > 0
    # Centroid signs agree with the classification on uncut elements.
    centroids = mesh.triangle_coords(np.arange(mesh.num_triangles)).mean(axis=1)
    vals = geom.eval(centroids)
    assert np.all(vals[cls.plus] > 0)
    assert np.all(vals[cls.minus] < 0)


def test_classify_lens_cut_through_on_grid_vertices():
    # The circle r = 0.25 at (0.5, 0.5) passes exactly through lattice
    # vertices of the n = 20 mesh (scaled 3-4-5 triples).  Elements whose
    # remaining vertex signs are single-signed still contain a thin lens
    # between the chord and the arc and must be flagged as cut.
    mesh = build_mesh(20)
    geom = LevelSetGeometry.circle((0.5, 0.5), 0.25)
    cls = classify(mesh, geom)
    from cutflow.cutcells import decompose
    dec = decompose(mesh, geom, cls)
    area = np.pi * 0.25 ** 2
    assert abs(dec.side_area(MINUS) - area) / area < 1e-4
    assert abs(dec.interface_length() - 2 * np.pi * 0.25) / (2 * np.pi * 0.25) < 1e-5


def test_classify_ellipse_tip_on_vertex():
    # Semi-axes 0.275/0.225 put both tips exactly on mesh vertices of the
    # n = 40 grid; the incident edges are tangent there and the crossing
    # must still be recovered.
    mesh = build_mesh(40)
    geom = LevelSetGeometry.ellipse((0.5, 0.5), (0.275, 0.225))
    cls = classify(mesh, geom)
    from cutflow.cutcells import decompose
    dec = decompose(mesh, geom, cls)
    area = np.pi * 0.275 * 0.225
    assert abs(dec.side_area(MINUS) - area) / area < 1e-4
    assert abs(dec.side_area(MINUS) + dec.side_area(PLUS) - 1.0) < 1e-12


def test_check_inside_rejects_touching_interface():
    geom = LevelSetGeometry.circle((0.5, 0.5), 0.5)
    mesh = build_mesh(8)
    with pytest.raises(ValueError):
        classify(mesh, geom)


def test_constructor_validation():
    with pytest.raises(ValueError):
        LevelSetGeometry.circle((0.5, 0.5), -0.1)
    with pytest.raises(ValueError):
        LevelSetGeometry("circle", (0.5, 0.5), (0.2, 0.3))
    with pytest.raises(ValueError):
        LevelSetGeometry("square", (0.5, 0.5), (0.2, 0.2))
