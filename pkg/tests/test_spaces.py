"""Lagrange spaces, fictitious dof maps and interface trace spaces."""

import numpy as np
import pytest

from cutflow.cutcells import decompose, interface_rule
from cutflow.levelset import CUT, MINUS, PLUS, LevelSetGeometry, classify
from cutflow.mesh import build_mesh
from cutflow.spaces import (build_fictitious, build_scalar_space,
                            build_trace_space, interpolate, interpolate_trace)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_partition_of_unity(degree):
    mesh = build_mesh(3)
    space = build_scalar_space(mesh, degree)
    pts = np.random.default_rng(0).uniform(0, 1, size=(20, 2))
    pts = pts[pts.sum(axis=1) <= 1.0]
    vals = space.ref_values(pts)
    grads = space.ref_grads(pts)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-11)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_nodal_basis_property(degree):
    mesh = build_mesh(2)
    space = build_scalar_space(mesh, degree)
    from cutflow.spaces import _reference_basis
    nodes, _, _ = _reference_basis(degree)
    vals = space.ref_values(nodes)
    assert np.allclose(vals, np.eye(len(nodes)), atol=1e-12)


@pytest.mark.parametrize("degree,count", [(1, 25), (2, 81), (3, 169)])
def test_dof_counts(degree, count):
    mesh = build_mesh(4)
    space = build_scalar_space(mesh, degree)
    assert space.ndofs == count
    assert len(space.boundary_dofs()) == 4 * degree * mesh.n


def test_p0_space():
    mesh = build_mesh(4)
    space = build_scalar_space(mesh, 0)
    assert space.ndofs == mesh.num_triangles
    assert space.local_size == 1
    assert len(space.boundary_dofs()) == 0
    # Single basis function is the constant 1 on the element.
    assert np.allclose(space.ref_values([[0.3, 0.3], [0.1, 0.2]]), 1.0)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_interpolation_reproduces_polynomials(degree):
    mesh = build_mesh(3)
    space = build_scalar_space(mesh, degree)
    f = lambda p: (1.0 + p[:, 0]) ** degree + p[:, 1] ** degree
    coeff = interpolate(space, f)
    # Evaluate the interpolant at interior points of a few elements.
    ref = np.array([[0.21, 0.33], [0.5, 0.1], [0.05, 0.61]])
    for t in (0, 5, 11):
        tri = mesh.triangle_coords(t)
        J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        phys = tri[0] + ref @ J.T
        vals = space.ref_values(ref) @ coeff[space.element_dofs[t]]
        assert np.allclose(vals, f(phys), atol=1e-11)


@pytest.fixture(scope="module")
def circle_setup():
    mesh = build_mesh(16)
    geom = LevelSetGeometry.circle((0.5, 0.5), 0.23)
    cls = classify(mesh, geom)
    dec = decompose(mesh, geom, cls)
    return mesh, cls, dec


def test_fictitious_map_restriction_extension(circle_setup):
    mesh, cls, _ = circle_setup
    space = build_scalar_space(mesh, 2)
    for side in (PLUS, MINUS):
        fm = build_fictitious(space, cls, side)
        RE = (fm.R @ fm.E).toarray()
        assert np.array_equal(RE, np.eye(fm.nkept))
        # Kept set is exactly the dofs of own plus cut elements.
        active = (cls.codes == side) | (cls.codes == CUT)
        expect = np.unique(space.element_dofs[active])
        assert np.array_equal(fm.kept, expect)


def test_fictitious_dirichlet_only_outer_side(circle_setup):
    mesh, cls, _ = circle_setup
    space = build_scalar_space(mesh, 2)
    plus = build_fictitious(space, cls, PLUS)
    minus = build_fictitious(space, cls, MINUS)
    # The inner phase never touches the outer boundary.
    assert len(minus.dirichlet) == 0
    assert len(plus.dirichlet) == len(space.boundary_dofs())


def test_trace_space_rank_and_gram(circle_setup):
    mesh, cls, dec = circle_setup
    for degree in (0, 1):
        space = build_scalar_space(mesh, degree)
        ts = build_trace_space(space, dec, tol_rank=1e-10)
        assert 0 < ts.nkept <= len(ts.candidates)
        ev = np.linalg.eigvalsh(ts.gram)
        assert ev[0] > 1e-10 * ev[-1]


def test_trace_projection_reproduces_polynomial_trace(circle_setup):
    mesh, cls, dec = circle_setup
    space = build_scalar_space(mesh, 1)
    ts = build_trace_space(space, dec)
    f = lambda p: 2.0 * p[:, 0] - p[:, 1] + 0.25
    coeff = interpolate_trace(ts, dec, f)
    # Compare the projected trace against f along the interface.
    num = den = 0.0
    for t in dec.cut_elements:
        rule = interface_rule(dec, int(t), order=4)
        vals = space.ref_values(space.phys_to_ref(int(t), rule.points))
        loc = ts.element_kept_dofs(int(t))
        ok = loc >= 0
        approx = vals[:, ok] @ coeff[loc[ok]]
        num += np.sum(rule.weights * (approx - f(rule.points)) ** 2)
        den += np.sum(rule.weights * f(rule.points) ** 2)
    assert np.sqrt(num / den) < 1e-9


def test_unsupported_degree():
    mesh = build_mesh(2)
    with pytest.raises(ValueError):
        build_scalar_space(mesh, 4)
