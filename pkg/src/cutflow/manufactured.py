"""Manufactured two-phase Stokes solution, error norms and the
verification studies (mesh refinement, gamma sweep, interface-position
robustness sweep)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .assembly import (DiscreteSetup, PhysicalParams, StabilizationParams,
                       assemble_rhs, assemble_system, build_setup)
from .cutcells import interface_rule, volume_rule
from .levelset import MINUS, PLUS, LevelSetGeometry
from .mesh import build_mesh
from .quadrature import triangle_rule
from .solver import FieldSolution, solve

DEFAULT_CENTER = (0.5, 0.5)
DEFAULT_RADIUS = 0.23


@dataclass(frozen=True)
class ExactSolutionSpec:
    """Closed-form reference fields for the circular-interface problem.

    The velocity is a divergence-free trigonometric vortex field and the
    pressure is piecewise smooth with amplitude 1 inside the circle and 3
    outside, vanishing at the circle center.
    """

    center: tuple[float, float] = DEFAULT_CENTER
    nu_plus: float = 2.0
    nu_minus: float = 1.0
    cp_plus: float = 3.0
    cp_minus: float = 1.0

    def cp(self, side: int) -> float:
        return self.cp_plus if side == PLUS else self.cp_minus

    def nu(self, side: int) -> float:
        return self.nu_plus if side == PLUS else self.nu_minus

    def velocity(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        px, py = np.pi * x[:, 0], np.pi * x[:, 1]
        return np.column_stack([np.cos(px) * np.sin(py), -np.sin(px) * np.cos(py)])

    def velocity_gradient(self, x) -> np.ndarray:
        """d u_i / d x_j at each point, shape (m, 2, 2)."""
        x = np.atleast_2d(x)
        px, py = np.pi * x[:, 0], np.pi * x[:, 1]
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = -np.pi * np.sin(px) * np.sin(py)
        g[:, 0, 1] = np.pi * np.cos(px) * np.cos(py)
        g[:, 1, 0] = -np.pi * np.cos(px) * np.cos(py)
        g[:, 1, 1] = np.pi * np.sin(px) * np.sin(py)
        return g

    def strain(self, x) -> np.ndarray:
        g = self.velocity_gradient(x)
        return 0.5 * (g + np.swapaxes(g, 1, 2))

    def pressure(self, x, side: int) -> np.ndarray:
        x = np.atleast_2d(x)
        xc, yc = self.center
        return self.cp(side) * ((x[:, 1] - yc) * np.cos(2 * np.pi * x[:, 0])
                                + (x[:, 0] - xc) * np.sin(2 * np.pi * x[:, 1]))

    def pressure_gradient(self, x, side: int) -> np.ndarray:
        x = np.atleast_2d(x)
        xc, yc = self.center
        tx, ty = 2 * np.pi * x[:, 0], 2 * np.pi * x[:, 1]
        gx = -2 * np.pi * (x[:, 1] - yc) * np.sin(tx) + np.sin(ty)
        gy = np.cos(tx) + 2 * np.pi * (x[:, 0] - xc) * np.cos(ty)
        return self.cp(side) * np.column_stack([gx, gy])

    def forcing(self, x, side: int) -> np.ndarray:
        """f = -nu Laplace(u) + grad p; Laplace(u) = -2 pi^2 u here."""
        return (2.0 * np.pi ** 2 * self.nu(side) * self.velocity(x)
                + self.pressure_gradient(x, side))

    def interface_force(self, x, n_minus) -> np.ndarray:
        """Traction jump g = sigma+ n+ + sigma- n- induced by the exact
        fields; n_minus is the unit normal pointing out of the inner
        subdomain (so the jump formula is evaluated with n = -n_minus)."""
        n = -np.atleast_2d(n_minus)
        eps = self.strain(x)
        dp = self.pressure(x, PLUS) - self.pressure(x, MINUS)
        return (2.0 * (self.nu_plus - self.nu_minus)
                * np.einsum("mij,mj->mi", eps, n) - dp[:, None] * n)

    def traction(self, x, side: int, n_side) -> np.ndarray:
        """sigma(u, p) n for one side with that side's outward normal."""
        eps = self.strain(x)
        return (2.0 * self.nu(side) * np.einsum("mij,mj->mi", eps,
                                                np.atleast_2d(n_side))
                - self.pressure(x, side)[:, None] * np.atleast_2d(n_side))


@dataclass
class ErrorReport:
    """Relative errors of one solve."""

    h: float
    err_u_l2: float
    err_u_h1: float
    err_p_l2: float
    err_lambda: float
    err_phi: float
    config: dict = field(default_factory=dict)

    def row(self):
        return [self.h, self.err_u_l2, self.err_u_h1, self.err_p_l2,
                self.err_lambda, self.err_phi]


def solve_manufactured(n: int, spec: ExactSolutionSpec | None = None,
                       radius: float = DEFAULT_RADIUS,
                       k_u: int = 2, k_p: int = 1, k_lambda: int = 0,
                       gamma0: float = 0.0, alpha0: float = 0.0,
                       quad_boost: int = 0, cache=None) -> FieldSolution:
    """Assemble and solve the manufactured-solution problem."""
    if spec is None:
        spec = ExactSolutionSpec()
    geom = LevelSetGeometry.circle(spec.center, radius)
    setup = build_setup(n, geom, k_u=k_u, k_p=k_p, k_lambda=k_lambda,
                        quad_boost=quad_boost)
    phys = PhysicalParams(nu_plus=spec.nu_plus, nu_minus=spec.nu_minus)
    stab = StabilizationParams(alpha0=alpha0, gamma0=gamma0)
    system = assemble_system(setup, phys, stab, cache=cache)
    rhs = assemble_rhs(setup,
                       f_plus=lambda x: spec.forcing(x, PLUS),
                       f_minus=lambda x: spec.forcing(x, MINUS),
                       g=lambda x, nrm, kappa: spec.interface_force(x, nrm),
                       system=system, u_boundary=spec.velocity)
    return solve(system, rhs)


def _volume_errors(sol: FieldSolution, spec: ExactSolutionSpec, boost: int):
    """Squared error accumulators for u (L2, H1 seminorm) and p."""
    s = sol.setup
    order = s.vol_order + boost
    rp, rw = triangle_rule(order)
    dx, dy = s.mesh.cell_size
    vv_ref = s.V.ref_values(rp)
    gv_ref = s.V.ref_grads(rp)
    qq_ref = s.Q.ref_values(rp)
    from .assembly import _element_jacobians
    Jinvs = [np.linalg.inv(J) for J in _element_jacobians(s.mesh)]

    num = np.zeros(3)       # u L2, u H1 semi, p L2
    den = np.zeros(3)
    for side in (PLUS, MINUS):
        cu = sol.u(side)
        cp_ = sol.p(side)

        def accumulate(pts, w, vv, gv, eldofs_v, eldofs_q, qq):
            # pts (e, q, 2); vv (e?, q, nu) broadcastable
            u_ex = spec.velocity(pts.reshape(-1, 2)).reshape(*pts.shape)
            g_ex = spec.velocity_gradient(pts.reshape(-1, 2)).reshape(
                *pts.shape[:-1], 2, 2)
            p_ex = spec.pressure(pts.reshape(-1, 2), side).reshape(pts.shape[:-1])
            u_h = np.einsum("eqa,iea->eqi", vv, cu[:, eldofs_v])
            g_h = np.einsum("eqad,iea->eqid", gv, cu[:, eldofs_v])
            p_h = np.einsum("eqc,ec->eq", qq, cp_[eldofs_q])
            num[0] += (w * ((u_h - u_ex) ** 2).sum(axis=-1)).sum()
            den[0] += (w * (u_ex ** 2).sum(axis=-1)).sum()
            num[1] += (w * ((g_h - g_ex) ** 2).sum(axis=(-1, -2))).sum()
            den[1] += (w * (g_ex ** 2).sum(axis=(-1, -2))).sum()
            num[2] += (w * (p_h - p_ex) ** 2).sum()
            den[2] += (w * p_ex ** 2).sum()

        own = np.flatnonzero(s.classification.codes == side)
        for o in (0, 1):
            els = own[own % 2 == o]
            if len(els) == 0:
                continue
            tris = s.mesh.triangle_coords(els)
            v0 = tris[:, 0]
            J = np.stack([tris[:, 1] - v0, tris[:, 2] - v0], axis=-1)
            pts = v0[:, None, :] + np.einsum("eab,qb->eqa", J, rp)
            gv = (gv_ref @ Jinvs[o])[None]
            accumulate(pts, (rw * dx * dy)[None, :], vv_ref[None], gv,
                       s.V.element_dofs[els], s.Q.element_dofs[els], qq_ref[None])

        for t in s.decomp.cut_elements:
            t = int(t)
            rule = volume_rule(s.decomp, t, side, order)
            if len(rule.weights) == 0:
                continue
            ref = s.V.phys_to_ref(t, rule.points)
            vv = s.V.ref_values(ref)[None]
            gv = (s.V.ref_grads(ref) @ Jinvs[t % 2])[None]
            qq = s.Q.ref_values(ref)[None]
            accumulate(rule.points[None], rule.weights[None], vv, gv,
                       s.V.element_dofs[t][None], s.Q.element_dofs[t][None], qq)
    return num, den


def _interface_errors(sol: FieldSolution, spec: ExactSolutionSpec, boost: int):
    """lambda error per the combined two-side quotient, and Phi error."""
    s = sol.setup
    order = s.iface_order + boost
    lam = {side: sol.lam(side) for side in (PLUS, MINUS)}
    cphi = sol.phi()
    num_lam = den_lam = 0.0
    num_phi = den_phi = 0.0
    for t in s.decomp.cut_elements:
        t = int(t)
        rule = interface_rule(s.decomp, t, order)
        w = rule.weights
        n = rule.normals
        ll = s.L.ref_values(s.L.phys_to_ref(t, rule.points))
        zz = ll if s.P is s.L else s.P.ref_values(s.P.phys_to_ref(t, rule.points))
        lk = s.W.element_kept_dofs(t)
        zk = s.Z.element_kept_dofs(t)
        for side in (PLUS, MINUS):
            ns = n if side == MINUS else -n
            lam_ex = spec.traction(rule.points, side, ns)
            lam_h = np.zeros_like(lam_ex)
            for a, kk in enumerate(lk):
                if kk >= 0:
                    lam_h += ll[:, a:a + 1] * lam[side][:, kk]
            num_lam += (w * ((lam_h - lam_ex) ** 2).sum(axis=1)).sum()
            den_lam += (w * (lam_ex ** 2).sum(axis=1)).sum()
        u_ex = spec.velocity(rule.points)
        phi_h = np.zeros_like(u_ex)
        for a, kk in enumerate(zk):
            if kk >= 0:
                phi_h += zz[:, a:a + 1] * cphi[:, kk]
        num_phi += (w * ((phi_h - u_ex) ** 2).sum(axis=1)).sum()
        den_phi += (w * (u_ex ** 2).sum(axis=1)).sum()
    return num_lam, den_lam, num_phi, den_phi


def lambda_error_quotient(num_plus: float, num_minus: float,
                          den_plus: float, den_minus: float) -> float:
    """Combined relative multiplier error over both sides."""
    return float(np.sqrt((num_plus + num_minus) / (den_plus + den_minus)))


def compute_errors(sol: FieldSolution, spec: ExactSolutionSpec | None = None,
                   boost: int = 2) -> ErrorReport:
    """All relative error norms of a manufactured-solution solve."""
    if spec is None:
        spec = ExactSolutionSpec()
    num, den = _volume_errors(sol, spec, boost)
    if (den == 0).any():
        raise ValueError("exact-solution norm vanishes; relative error undefined")
    nl, dl, nphi, dphi = _interface_errors(sol, spec, boost)
    # H1 norm includes the L2 part.
    return ErrorReport(
        h=sol.setup.mesh.h,
        err_u_l2=float(np.sqrt(num[0] / den[0])),
        err_u_h1=float(np.sqrt((num[0] + num[1]) / (den[0] + den[1]))),
        err_p_l2=float(np.sqrt(num[2] / den[2])),
        err_lambda=float(np.sqrt(nl / dl)),
        err_phi=float(np.sqrt(nphi / dphi)),
    )


def regression_slope(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)),
                            np.log(np.asarray(errs, dtype=float)), 1)[0])


def convergence_study(ns, k_u: int = 2, k_p: int = 1, k_lambda: int = 0,
                      gamma0: float = 0.0, alpha0: float = 0.0,
                      spec: ExactSolutionSpec | None = None,
                      csv_path: str | None = None):
    """Refinement study; returns (reports, slope per error column)."""
    if len(ns) < 3:
        raise ValueError("need at least 3 mesh sizes for a regression slope")
    reports = []
    for n in ns:
        sol = solve_manufactured(n, spec, k_u=k_u, k_p=k_p, k_lambda=k_lambda,
                                 gamma0=gamma0, alpha0=alpha0)
        reports.append(compute_errors(sol, spec))
    hs = [r.h for r in reports]
    cols = ["errL2u", "errH1u", "errL2p", "errLambda", "errPhi"]
    slopes = {c: regression_slope(hs, [r.row()[i + 1] for r in reports])
              for i, c in enumerate(cols)}
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["h"] + cols)
            for r in reports:
                w.writerow([repr(v) for v in r.row()])
            w.writerow(["slope"] + [repr(slopes[c]) for c in cols])
    return reports, slopes


def sweep_gamma(gamma0_values, n: int = 10, k_u: int = 2, k_p: int = 1,
                k_lambda: int = 0, spec: ExactSolutionSpec | None = None,
                csv_path: str | None = None):
    """Multiplier error as a function of the gamma stabilization weight."""
    out = []
    cache = None
    for g0 in gamma0_values:
        if g0 < 0:
            raise ValueError("gamma0 must be nonnegative")
        sol = solve_manufactured(n, spec, k_u=k_u, k_p=k_p, k_lambda=k_lambda,
                                 gamma0=g0)
        out.append((float(g0), compute_errors(sol, spec).err_lambda))
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["gamma0", "errLambda"])
            for g0, e in out:
                w.writerow([repr(g0), repr(e)])
    return out


def sweep_center(xc_values, n: int = 10, k_u: int = 2, k_p: int = 1,
                 k_lambda: int = 0, gamma0_stab: float = 0.02,
                 radius: float = DEFAULT_RADIUS,
                 csv_path: str | None = None):
    """Robustness of the multiplier error to the interface position.

    For every center abscissa runs both the unstabilized (gamma0 = 0) and
    the stabilized solve; solver failures are recorded as NaN rather than
    aborting the sweep.
    """
    out = []
    for xc in xc_values:
        spec = ExactSolutionSpec(center=(float(xc), 0.5))
        errs = []
        for g0 in (0.0, gamma0_stab):
            try:
                sol = solve_manufactured(n, spec, radius=radius, k_u=k_u,
                                         k_p=k_p, k_lambda=k_lambda, gamma0=g0)
                errs.append(compute_errors(sol, spec).err_lambda)
            except Exception:
                errs.append(float("nan"))
        out.append((float(xc), errs[0], errs[1]))
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["xc", "errLambda_unstab", "errLambda_stab"])
            for row in out:
                w.writerow([repr(v) for v in row])
    return out
