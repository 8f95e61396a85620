"""Assembly of the stabilized two-phase saddle-point system.

Unknown blocks, in order: u+, p+, lambda+, u-, p-, lambda-, Phi, and one
scalar multiplier pinning the global pressure mean.  Velocity and
multiplier blocks are component-major: dof = comp * nscalar + scalar_dof.

Bulk blocks are extracted from background matrices assembled once over
the whole uncut mesh (two congruent element orientations), then
corrected near the interface: full-element contributions from elements
on the wrong side are subtracted and cut elements are re-integrated with
cut-cell quadrature.  Interface blocks are always assembled directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cutcells import CutDecomposition, decompose, interface_rule, volume_rule
from .levelset import CUT, MINUS, PLUS, ElementClassification, LevelSetGeometry, classify
from .mesh import CartesianMesh, build_mesh
from .quadrature import triangle_rule
from .spaces import (FictitiousDofMap, ScalarSpace, TraceSpace, build_fictitious,
                     build_scalar_space, build_trace_space)

BLOCKS = ("u+", "p+", "l+", "u-", "p-", "l-", "phi", "mean")


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosities, optional densities and surface tension coefficient."""

    nu_plus: float
    nu_minus: float
    rho_plus: float | None = None
    rho_minus: float | None = None
    mu: float = 0.0

    def __post_init__(self):
        if not (self.nu_plus > 0 and self.nu_minus > 0):
            raise ValueError("viscosities must be positive")
        for rho in (self.rho_plus, self.rho_minus):
            if rho is not None and rho < 0:
                raise ValueError("densities must be nonnegative")
        if self.mu < 0:
            raise ValueError("surface tension must be nonnegative")

    def nu(self, side: int) -> float:
        return self.nu_plus if side == PLUS else self.nu_minus

    def rho(self, side: int) -> float:
        rho = self.rho_plus if side == PLUS else self.rho_minus
        return 0.0 if rho is None else rho


@dataclass(frozen=True)
class StabilizationParams:
    """Interface stabilization weights alpha0 and gamma = gamma0 * h."""

    alpha0: float = 0.0
    gamma0: float = 0.0

    def __post_init__(self):
        if self.alpha0 < 0 or self.gamma0 < 0:
            raise ValueError("stabilization parameters must be nonnegative")

    def gamma(self, mesh: CartesianMesh) -> float:
        return self.gamma0 * mesh.h


@dataclass
class DiscreteSetup:
    """Mesh, geometry, decomposition, spaces and dof maps for one state."""

    mesh: CartesianMesh
    geom: LevelSetGeometry
    classification: ElementClassification
    decomp: CutDecomposition
    V: ScalarSpace
    Q: ScalarSpace
    L: ScalarSpace                  # generating space for lambda traces
    P: ScalarSpace                  # generating space for Phi traces
    Vmap: dict                      # side -> FictitiousDofMap
    Qmap: dict
    W: TraceSpace                   # lambda+/- traces
    Z: TraceSpace                   # Phi traces
    vol_order: int
    iface_order: int
    offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = {
            "u+": 2 * self.Vmap[PLUS].nkept, "p+": self.Qmap[PLUS].nkept,
            "l+": 2 * self.W.nkept,
            "u-": 2 * self.Vmap[MINUS].nkept, "p-": self.Qmap[MINUS].nkept,
            "l-": 2 * self.W.nkept,
            "phi": 2 * self.Z.nkept, "mean": 1,
        }
        off = 0
        for name in BLOCKS:
            self.offsets[name] = off
            off += sizes[name]
        self.total = off
        self.sizes = sizes

    def block_slice(self, name: str) -> slice:
        return slice(self.offsets[name], self.offsets[name] + self.sizes[name])

    def ublock(self, side: int) -> str:
        return "u+" if side == PLUS else "u-"

    def pblock(self, side: int) -> str:
        return "p+" if side == PLUS else "p-"

    def lblock(self, side: int) -> str:
        return "l+" if side == PLUS else "l-"


def build_setup(mesh_or_n, geom: LevelSetGeometry, k_u: int = 2, k_p: int = 1,
                k_lambda: int = 0, k_phi: int | None = None,
                quad_boost: int = 0, tol_rank: float = 1e-10) -> DiscreteSetup:
    """Build all spaces and maps for a mesh/interface configuration."""
    if k_phi is None:
        k_phi = k_lambda
    mesh = mesh_or_n if isinstance(mesh_or_n, CartesianMesh) else build_mesh(mesh_or_n)
    cls = classify(mesh, geom)
    dec = decompose(mesh, geom, cls)
    V = build_scalar_space(mesh, k_u)
    Q = build_scalar_space(mesh, k_p)
    L = build_scalar_space(mesh, k_lambda)
    P = L if k_phi == k_lambda else build_scalar_space(mesh, k_phi)
    Vmap = {s: build_fictitious(V, cls, s) for s in (PLUS, MINUS)}
    Qmap = {s: build_fictitious(Q, cls, s) for s in (PLUS, MINUS)}
    W = build_trace_space(L, dec, tol_rank)
    Z = W if P is L else build_trace_space(P, dec, tol_rank)
    vol_order = 2 * max(k_u, k_p + 1) + quad_boost
    iface_order = 2 * k_u + 2 + quad_boost
    return DiscreteSetup(mesh, geom, cls, dec, V, Q, L, P, Vmap, Qmap, W, Z,
                         vol_order, iface_order)


@dataclass
class GlobalStiffnessCache:
    """Background matrices over the whole uncut mesh, assembled once.

    A is the vector strain form int eps(phi_i):eps(phi_j) (unit
    viscosity), B the pressure-gradient pairing int psi_c d_i phi_a, Mv
    the scalar velocity mass matrix.  Per-orientation local matrices are
    kept for the near-interface corrections.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    Mv: sp.csr_matrix
    A_loc: list        # per orientation, (2nu, 2nu)
    B_loc: list        # per orientation, (2nu, nq)
    M_loc: list        # per orientation, (nu, nu)
    vol_order: int


def _element_jacobians(mesh: CartesianMesh):
    dx, dy = mesh.cell_size
    J_lo = np.array([[dx, 0.0], [0.0, dy]])
    J_up = np.array([[0.0, -dx], [dy, dy]])
    return [J_lo, J_up]


def _local_bulk(V: ScalarSpace, Q: ScalarSpace, pts_ref: np.ndarray,
                w_phys: np.ndarray, Jinv: np.ndarray):
    """Element-local strain, pressure-gradient and mass matrices.

    pts_ref are reference points; w_phys physical quadrature weights
    (already including the Jacobian determinant).
    """
    gv = V.ref_grads(pts_ref) @ Jinv          # (m, nu, 2) physical gradients
    vv = V.ref_values(pts_ref)                # (m, nu)
    qq = Q.ref_values(pts_ref)                # (m, nq)
    nu_ = gv.shape[1]
    G = np.einsum("q,qad,qbd->ab", w_phys, gv, gv)
    A = np.zeros((2 * nu_, 2 * nu_))
    for i in range(2):
        for j in range(2):
            H = np.einsum("q,qa,qb->ab", w_phys, gv[:, :, j], gv[:, :, i])
            A[i * nu_:(i + 1) * nu_, j * nu_:(j + 1) * nu_] = \
                0.5 * ((G if i == j else 0.0) + H)
    B = np.zeros((2 * nu_, qq.shape[1]))
    for i in range(2):
        B[i * nu_:(i + 1) * nu_] = np.einsum("q,qa,qc->ac", w_phys, gv[:, :, i], qq)
    M = np.einsum("q,qa,qb->ab", w_phys, vv, vv)
    return A, B, M


def assemble_global_stiffness(setup: DiscreteSetup) -> GlobalStiffnessCache:
    """Assemble the uncut background matrices (both element orientations)."""
    mesh, V, Q = setup.mesh, setup.V, setup.Q
    rp, rw = triangle_rule(setup.vol_order)
    dx, dy = mesh.cell_size
    detJ = dx * dy
    Js = _element_jacobians(mesh)
    A_loc, B_loc, M_loc = [], [], []
    for J in Js:
        A, B, M = _local_bulk(V, Q, rp, rw * detJ, np.linalg.inv(J))
        A_loc.append(A)
        B_loc.append(B)
        M_loc.append(M)

    N, Nq = V.ndofs, Q.ndofs
    nu_ = V.local_size
    rows_A, cols_A, vals_A = [], [], []
    rows_B, cols_B, vals_B = [], [], []
    rows_M, cols_M, vals_M = [], [], []
    for o in (0, 1):
        els = np.arange(o, mesh.num_triangles, 2)
        ev = V.element_dofs[els]                       # (ne, nu)
        eq = Q.element_dofs[els]
        vec = np.concatenate([ev, ev + N], axis=1)     # (ne, 2nu)
        r = np.repeat(vec, 2 * nu_, axis=1).ravel()
        c = np.tile(vec, (1, 2 * nu_)).ravel()
        rows_A.append(r)
        cols_A.append(c)
        vals_A.append(np.tile(A_loc[o].ravel(), len(els)))
        rows_B.append(np.repeat(vec, eq.shape[1], axis=1).ravel())
        cols_B.append(np.tile(eq, (1, 2 * nu_)).ravel())
        vals_B.append(np.tile(B_loc[o].ravel(), len(els)))
        rows_M.append(np.repeat(ev, nu_, axis=1).ravel())
        cols_M.append(np.tile(ev, (1, nu_)).ravel())
        vals_M.append(np.tile(M_loc[o].ravel(), len(els)))

    A = sp.coo_matrix((np.concatenate(vals_A),
                       (np.concatenate(rows_A), np.concatenate(cols_A))),
                      shape=(2 * N, 2 * N)).tocsr()
    B = sp.coo_matrix((np.concatenate(vals_B),
                       (np.concatenate(rows_B), np.concatenate(cols_B))),
                      shape=(2 * N, Nq)).tocsr()
    Mv = sp.coo_matrix((np.concatenate(vals_M),
                        (np.concatenate(rows_M), np.concatenate(cols_M))),
                       shape=(N, N)).tocsr()
    return GlobalStiffnessCache(A, B, Mv, A_loc, B_loc, M_loc, setup.vol_order)


@dataclass
class BlockSaddleSystem:
    """Assembled sparse system with block offsets and dirichlet mask."""

    setup: DiscreteSetup
    matrix: sp.csr_matrix
    dirichlet: np.ndarray          # global indices with pinned unknowns
    lift: sp.csc_matrix            # pre-elimination columns of the pinned dofs
    cache: GlobalStiffnessCache
    touched_bulk_entries: int      # correction entries written near the cut

    def block(self, row: str, col: str) -> sp.csr_matrix:
        return self.matrix[self.setup.block_slice(row), self.setup.block_slice(col)]


def _side_correction_elements(setup: DiscreteSetup, side: int) -> np.ndarray:
    """Opposite-side elements that still touch kept dofs of this side."""
    codes = setup.classification.codes
    opp = np.flatnonzero(codes == -side)
    g2k = setup.Vmap[side].global_to_kept
    has = (g2k[setup.V.element_dofs[opp]] >= 0).any(axis=1)
    g2kq = setup.Qmap[side].global_to_kept
    has |= (g2kq[setup.Q.element_dofs[opp]] >= 0).any(axis=1)
    return opp[has]


def _scatter(rows, cols, vals, r, c, M):
    """Append dense block M at global rows r, cols c (skipping negatives)."""
    R = np.repeat(r, len(c))
    C = np.tile(c, len(r))
    V = np.asarray(M).ravel()
    keep = (R >= 0) & (C >= 0)
    rows.append(R[keep])
    cols.append(C[keep])
    vals.append(V[keep])


def _cut_bulk_local(setup: DiscreteSetup, element: int, side: int):
    """Bulk local matrices of a cut element, integrated over one side."""
    rule = volume_rule(setup.decomp, element, side, setup.vol_order)
    if len(rule.weights) == 0:
        nu_, nq = setup.V.local_size, setup.Q.local_size
        return (np.zeros((2 * nu_, 2 * nu_)), np.zeros((2 * nu_, nq)),
                np.zeros((nu_, nu_)), np.zeros(nq))
    Jinv = np.linalg.inv(_element_jacobians(setup.mesh)[element % 2])
    ref = setup.V.phys_to_ref(element, rule.points)
    A, B, M = _local_bulk(setup.V, setup.Q, ref, rule.weights, Jinv)
    pint = setup.Q.ref_values(ref).T @ rule.weights
    return A, B, M, pint


def _vector_kept(fm: FictitiousDofMap) -> np.ndarray:
    return np.concatenate([fm.kept, fm.kept + fm.space.ndofs])


def _interface_basis(setup: DiscreteSetup, element: int):
    """Basis data of all spaces at the interface rule of a cut element."""
    rule = interface_rule(setup.decomp, element, setup.iface_order)
    ref = setup.V.phys_to_ref(element, rule.points)
    Jinv = np.linalg.inv(_element_jacobians(setup.mesh)[element % 2])
    vv = setup.V.ref_values(ref)
    gv = setup.V.ref_grads(ref) @ Jinv
    qq = setup.Q.ref_values(ref)
    ll = setup.L.ref_values(ref)
    zz = ll if setup.P is setup.L else setup.P.ref_values(ref)
    return rule, vv, gv, qq, ll, zz


def assemble_system(setup: DiscreteSetup, phys: PhysicalParams,
                    stab: StabilizationParams,
                    cache: GlobalStiffnessCache | None = None) -> BlockSaddleSystem:
    """Assemble the full stabilized saddle-point matrix."""
    if cache is None:
        cache = assemble_global_stiffness(setup)
    if cache.vol_order != setup.vol_order:
        raise ValueError("cached background matrices use a different quadrature order")

    mesh = setup.mesh
    N = setup.V.ndofs
    gamma = stab.gamma(mesh)
    off = setup.offsets
    rows: list = []
    cols: list = []
    vals: list = []
    touched = 0

    mean_row = np.zeros(setup.total)

    for side in (PLUS, MINUS):
        nu_side = phys.nu(side)
        Vm, Qm = setup.Vmap[side], setup.Qmap[side]
        vk = _vector_kept(Vm)
        ub, pb = off[setup.ublock(side)], off[setup.pblock(side)]
        nk = Vm.nkept

        Ar = cache.A[vk][:, vk].tocoo()
        rows.append(Ar.row + ub)
        cols.append(Ar.col + ub)
        vals.append(2.0 * nu_side * Ar.data)
        Br = cache.B[vk][:, Qm.kept].tocoo()
        rows.append(Br.row + ub)
        cols.append(Br.col + pb)
        vals.append(-Br.data)
        rows.append(Br.col + pb)
        cols.append(Br.row + ub)
        vals.append(-Br.data)

        # Corrections: subtract wrong-side and cut full-element locals,
        # add back cut-cell quadrature on cut elements.
        def side_vdofs(t):
            lk = Vm.global_to_kept[setup.V.element_dofs[t]]
            both = np.concatenate([lk, np.where(lk >= 0, lk + nk, -1)])
            return np.where(both >= 0, both + ub, -1)

        def side_qdofs(t):
            lk = Qm.global_to_kept[setup.Q.element_dofs[t]]
            return np.where(lk >= 0, lk + pb, -1)

        for t in _side_correction_elements(setup, side):
            o = t % 2
            r = side_vdofs(t)
            rq = side_qdofs(t)
            _scatter(rows, cols, vals, r, r, -2.0 * nu_side * cache.A_loc[o])
            _scatter(rows, cols, vals, r, rq, cache.B_loc[o])
            _scatter(rows, cols, vals, rq, r, cache.B_loc[o].T)
            touched += len(r) ** 2 + 2 * len(r) * len(rq)

        for t in setup.decomp.cut_elements:
            t = int(t)
            o = t % 2
            r = side_vdofs(t)
            rq = side_qdofs(t)
            Ac, Bc, _, pint = _cut_bulk_local(setup, t, side)
            _scatter(rows, cols, vals, r, r,
                     2.0 * nu_side * (Ac - cache.A_loc[o]))
            dB = Bc - cache.B_loc[o]
            _scatter(rows, cols, vals, r, rq, -dB)
            _scatter(rows, cols, vals, rq, r, -dB.T)
            touched += len(r) ** 2 + 2 * len(r) * len(rq)
            mean_row[rq] += pint

        # Pressure integrals over full elements of this side (mean row).
        rp, rw = triangle_rule(setup.vol_order)
        dx, dy = mesh.cell_size
        pint_ref = setup.Q.ref_values(rp).T @ (rw * dx * dy)   # same both orientations
        own = np.flatnonzero(setup.classification.codes == side)
        eq = Qm.global_to_kept[setup.Q.element_dofs[own]]
        np.add.at(mean_row, eq + pb, np.broadcast_to(pint_ref, eq.shape))

    # Interface blocks.
    nW, nZ = setup.W.nkept, setup.Z.nkept
    phib = off["phi"]
    for t in setup.decomp.cut_elements:
        t = int(t)
        rule, vv, gv, qq, ll, zz = _interface_basis(setup, t)
        w = rule.weights
        n = rule.normals
        lk = setup.W.element_kept_dofs(t)
        zk = setup.Z.element_kept_dofs(t)
        m, nu_ = vv.shape
        nq = qq.shape[1]
        nl = ll.shape[1]

        for side in (PLUS, MINUS):
            nu_s = phys.nu(side)
            ns = n if side == MINUS else -n
            Vm = setup.Vmap[side]
            nk = Vm.nkept
            g = setup.V.element_dofs[t]
            lkv = Vm.global_to_kept[g]
            r_u = np.concatenate([lkv, lkv + nk]) + off[setup.ublock(side)]
            r_p = setup.Qmap[side].global_to_kept[setup.Q.element_dofs[t]] \
                + off[setup.pblock(side)]
            lb = off[setup.lblock(side)]
            r_l = np.concatenate([np.where(lk >= 0, lk + lb, -1),
                                  np.where(lk >= 0, lk + nW + lb, -1)])
            r_z = np.concatenate([np.where(zk >= 0, zk + phib, -1),
                                  np.where(zk >= 0, zk + nZ + phib, -1)])

            # Multiplier coupling -int lambda.(v - phi) and transpose.
            cul = np.einsum("q,qa,qm->am", w, vv, ll)
            czl = np.einsum("q,qz,qm->zm", w, zz, ll)
            for comp in range(2):
                ru = r_u[comp * nu_:(comp + 1) * nu_]
                rl = r_l[comp * nl:(comp + 1) * nl]
                rz = r_z[comp * zz.shape[1]:(comp + 1) * zz.shape[1]]
                _scatter(rows, cols, vals, ru, rl, -cul)
                _scatter(rows, cols, vals, rl, ru, -cul.T)
                _scatter(rows, cols, vals, rz, rl, czl)
                _scatter(rows, cols, vals, rl, rz, czl.T)

            # Augmentation alpha0 * int (u - Phi).(v - phi).
            if stab.alpha0 > 0:
                auu = stab.alpha0 * np.einsum("q,qa,qb->ab", w, vv, vv)
                auz = stab.alpha0 * np.einsum("q,qa,qz->az", w, vv, zz)
                azz = stab.alpha0 * np.einsum("q,qy,qz->yz", w, zz, zz)
                for comp in range(2):
                    ru = r_u[comp * nu_:(comp + 1) * nu_]
                    rz = r_z[comp * zz.shape[1]:(comp + 1) * zz.shape[1]]
                    _scatter(rows, cols, vals, ru, ru, auu)
                    _scatter(rows, cols, vals, ru, rz, -auz)
                    _scatter(rows, cols, vals, rz, ru, -auz.T)
                    _scatter(rows, cols, vals, rz, rz, azz)

            # gamma * residual stabilization
            # -gamma int (2 nu eps(u)n - p n - lambda).(same with tests).
            if gamma > 0:
                ndl = 2 * nu_ + nq + 2 * nl
                S = np.zeros((m, 2, ndl))
                gdotn = np.einsum("qad,qd->qa", gv, ns)
                for d in range(2):
                    for comp in range(2):
                        S[:, d, comp * nu_:(comp + 1) * nu_] = \
                            nu_s * gv[:, :, d] * ns[:, comp:comp + 1]
                        if d == comp:
                            S[:, d, comp * nu_:(comp + 1) * nu_] += nu_s * gdotn
                    S[:, d, 2 * nu_:2 * nu_ + nq] = -qq * ns[:, d:d + 1]
                    S[:, d, 2 * nu_ + nq + d * nl:2 * nu_ + nq + (d + 1) * nl] = -ll
                K = -gamma * np.einsum("q,qdi,qdj->ij", w, S, S)
                r_all = np.concatenate([r_u, r_p, r_l])
                _scatter(rows, cols, vals, r_all, r_all, K)

    # Bordered global pressure-mean row/column.
    mrow = off["mean"]
    nzm = np.flatnonzero(mean_row)
    rows.append(np.full(len(nzm), mrow))
    cols.append(nzm)
    vals.append(mean_row[nzm])
    rows.append(nzm)
    cols.append(np.full(len(nzm), mrow))
    vals.append(mean_row[nzm])

    R = np.concatenate(rows)
    C = np.concatenate(cols)
    Vv = np.concatenate(vals)

    # Dirichlet condition for u+ on the domain boundary: eliminate rows
    # and columns, keeping the eliminated columns for rhs lifting.
    nkp = setup.Vmap[PLUS].nkept
    dir_local = setup.Vmap[PLUS].dirichlet
    dirichlet = np.concatenate([dir_local, dir_local + nkp]) + off["u+"]
    mask = np.zeros(setup.total, dtype=bool)
    mask[dirichlet] = True
    in_cols = mask[C] & ~mask[R]
    lift = sp.coo_matrix(
        (Vv[in_cols], (R[in_cols],
                       np.searchsorted(dirichlet, C[in_cols]))),
        shape=(setup.total, len(dirichlet))).tocsc()
    keep = ~(mask[R] | mask[C])
    R, C, Vv = R[keep], C[keep], Vv[keep]
    R = np.concatenate([R, dirichlet])
    C = np.concatenate([C, dirichlet])
    Vv = np.concatenate([Vv, np.ones(len(dirichlet))])

    M = sp.coo_matrix((Vv, (R, C)), shape=(setup.total, setup.total)).tocsr()
    M.sum_duplicates()
    return BlockSaddleSystem(setup, M, dirichlet, lift, cache, touched)


def assemble_rhs(setup: DiscreteSetup, f_plus=None, f_minus=None, g=None,
                 system: BlockSaddleSystem | None = None,
                 u_boundary=None) -> np.ndarray:
    """Right-hand side: volume forces on u+/u- and interface force on Phi.

    f_plus/f_minus map (m, 2) points to (m, 2) vectors; g additionally
    receives the interface normals and curvatures; None means zero.  With
    a system, the Dirichlet condition u+ = u_boundary on the domain
    boundary (zero if None) is applied by lifting.
    """
    rhs = np.zeros(setup.total)
    off = setup.offsets
    rp, rw = triangle_rule(setup.vol_order)
    dx, dy = setup.mesh.cell_size
    vv_ref = setup.V.ref_values(rp)

    for side, f in ((PLUS, f_plus), (MINUS, f_minus)):
        if f is None:
            continue
        Vm = setup.Vmap[side]
        nk = Vm.nkept
        ub = off[setup.ublock(side)]
        own = np.flatnonzero(setup.classification.codes == side)
        if len(own):
            tris = setup.mesh.triangle_coords(own)
            v0 = tris[:, 0]
            J = np.stack([tris[:, 1] - v0, tris[:, 2] - v0], axis=-1)
            pts = v0[:, None, :] + np.einsum("eab,qb->eqa", J, rp)
            fv = np.asarray(f(pts.reshape(-1, 2))).reshape(len(own), len(rw), 2)
            contrib = np.einsum("q,eqi,qa->eia", rw * dx * dy, fv, vv_ref)
            lk = Vm.global_to_kept[setup.V.element_dofs[own]]
            for comp in range(2):
                np.add.at(rhs, ub + comp * nk + lk, contrib[:, comp, :])
        for t in setup.decomp.cut_elements:
            t = int(t)
            rule = volume_rule(setup.decomp, t, side, setup.vol_order)
            if len(rule.weights) == 0:
                continue
            vv = setup.V.ref_values(setup.V.phys_to_ref(t, rule.points))
            fv = np.asarray(f(rule.points))
            lk = Vm.global_to_kept[setup.V.element_dofs[t]]
            for comp in range(2):
                rhs[ub + comp * nk + lk] += (rule.weights[:, None]
                                             * fv[:, comp:comp + 1] * vv).sum(axis=0)

    if g is not None:
        nZ = setup.Z.nkept
        for t in setup.decomp.cut_elements:
            t = int(t)
            rule = interface_rule(setup.decomp, t, setup.iface_order)
            zz = setup.P.ref_values(setup.P.phys_to_ref(t, rule.points))
            gv = np.asarray(g(rule.points, rule.normals, rule.curvatures))
            zk = setup.Z.element_kept_dofs(t)
            for a, k in enumerate(zk):
                if k < 0:
                    continue
                for comp in range(2):
                    rhs[off["phi"] + comp * nZ + k] += \
                        (rule.weights * gv[:, comp] * zz[:, a]).sum()

    if system is not None:
        nd = len(system.dirichlet)
        vals = np.zeros(nd)
        if u_boundary is not None and nd:
            fm = setup.Vmap[PLUS]
            pts = setup.V.dof_points[fm.kept[fm.dirichlet]]
            ub = np.asarray(u_boundary(pts))
            vals = np.concatenate([ub[:, 0], ub[:, 1]])
        rhs -= system.lift @ vals
        rhs[system.dirichlet] = vals
    return rhs


def update_system(system: BlockSaddleSystem, new_setup: DiscreteSetup,
                  phys: PhysicalParams, stab: StabilizationParams) -> BlockSaddleSystem:
    """Reassemble for a moved interface, reusing the background matrices.

    Only near-interface bulk corrections and the interface blocks are
    recomputed; the result matches a from-scratch assembly exactly.
    """
    old = system.setup
    if new_setup.mesh is not old.mesh and not (
            new_setup.mesh.n == old.mesh.n and new_setup.mesh.domain == old.mesh.domain):
        raise ValueError("update requires the same background mesh")
    if (new_setup.V.degree, new_setup.Q.degree, new_setup.L.degree) != \
            (old.V.degree, old.Q.degree, old.L.degree):
        raise ValueError("update requires the same finite element degrees")
    return assemble_system(new_setup, phys, stab, cache=system.cache)


def export_matrix(system: BlockSaddleSystem, path: str) -> None:
    """Write the matrix in MatrixMarket coordinate format."""
    import scipy.io
    scipy.io.mmwrite(path, system.matrix)
