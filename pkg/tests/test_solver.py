"""Direct solve of the assembled system and solution block accessors."""

import numpy as np
import pytest

from cutflow.assembly import (PhysicalParams, StabilizationParams,
                              assemble_rhs, assemble_system, build_setup)
from cutflow.levelset import MINUS, PLUS, LevelSetGeometry
from cutflow.solver import solve


@pytest.fixture(scope="module")
def solved():
    geom = LevelSetGeometry.circle((0.5, 0.5), 0.23)
    setup = build_setup(10, geom, k_u=2, k_p=1, k_lambda=0)
    phys = PhysicalParams(nu_plus=2.0, nu_minus=1.0)
    system = assemble_system(setup, phys, StabilizationParams(0.01, 0.02))
    f = lambda p: np.column_stack([np.sin(3 * p[:, 0]), p[:, 1] ** 2])
    rhs = assemble_rhs(setup, f_plus=f, f_minus=f, system=system)
    return setup, system, rhs, solve(system, rhs)


def test_residual_small(solved):
    setup, system, rhs, sol = solved
    assert sol.residual <= 1e-10
    res = np.abs(system.matrix @ sol.x - rhs).max()
    assert res <= 1e-10 * max(np.abs(rhs).max(), 1e-30)


def test_block_accessors(solved):
    setup, _, _, sol = solved
    for side in (PLUS, MINUS):
        u = sol.u(side)
        assert u.shape == (2, setup.V.ndofs)
        # Extension by zero off the kept set.
        dropped = np.setdiff1d(np.arange(setup.V.ndofs), setup.Vmap[side].kept)
        assert np.all(u[:, dropped] == 0.0)
        p = sol.p(side)
        assert p.shape == (setup.Q.ndofs,)
        lam = sol.lam(side)
        assert lam.shape == (2, setup.W.nkept)
    assert sol.phi().shape == (2, setup.Z.nkept)
    assert np.isfinite(sol.mean_multiplier)


def test_dirichlet_values_honored(solved):
    setup, system, rhs, sol = solved
    assert np.allclose(sol.x[system.dirichlet], 0.0, atol=1e-12)


def test_pressure_mean_pinned(solved):
    """The single mean constraint forces the combined pressure integral
    over both subdomains to vanish."""
    setup, _, _, sol = solved
    from cutflow.cutcells import volume_rule
    total = 0.0
    for side in (PLUS, MINUS):
        p = sol.p(side)
        for t in range(setup.mesh.num_triangles):
            rule = volume_rule(setup.decomp, t, side, setup.vol_order)
            if len(rule.weights) == 0:
                continue
            qq = setup.Q.ref_values(setup.Q.phys_to_ref(t, rule.points))
            total += float(rule.weights @ (qq @ p[setup.Q.element_dofs[t]]))
    assert abs(total) < 1e-9
