"""Finite element spaces on the structured mesh: Lagrange spaces P0-P3,
fictitious (restricted) dof maps for the two sides of the interface, and
interface trace spaces with elimination of dependent traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .cutcells import CutDecomposition, interface_rule
from .levelset import CUT, MINUS, PLUS, ElementClassification
from .mesh import CartesianMesh
from .quadrature import triangle_rule


@lru_cache(maxsize=None)
def _reference_basis(degree: int):
    """Lagrange basis on the unit reference triangle.

    Returns (nodes (nld,2), coeffs (nmono,nld), exps (nmono,2)) with the
    basis value  phi_j(x) = sum_e coeffs[e,j] x^exps[e,0] y^exps[e,1].
    """
    k = degree
    if k == 0:
        return np.array([[1/3, 1/3]]), np.array([[1.0]]), np.array([[0, 0]])
    nodes = np.array([(a / k, b / k) for b in range(k + 1) for a in range(k + 1 - b)])
    exps = np.array([(p, q) for q in range(k + 1) for p in range(k + 1 - q)])
    V = (nodes[:, 0][:, None] ** exps[:, 0]) * (nodes[:, 1][:, None] ** exps[:, 1])
    return nodes, np.linalg.inv(V), exps


@dataclass(frozen=True)
class ScalarSpace:
    """Continuous Pk (k >= 1) or discontinuous P0 space on the mesh.

    For k >= 1 the dofs sit on the refined lattice with k*n+1 points per
    axis; for k = 0 there is one dof per triangle.
    """

    mesh: CartesianMesh
    degree: int
    element_dofs: np.ndarray      # (nt, nld) int
    dof_points: np.ndarray        # (ndofs, 2)

    @property
    def ndofs(self) -> int:
        return len(self.dof_points)

    @property
    def local_size(self) -> int:
        return self.element_dofs.shape[1]

    def ref_values(self, pts) -> np.ndarray:
        """Basis values at reference points, shape (m, nld)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, C, exps = _reference_basis(self.degree)
        M = (pts[:, 0][:, None] ** exps[:, 0]) * (pts[:, 1][:, None] ** exps[:, 1])
        return M @ C

    def ref_grads(self, pts) -> np.ndarray:
        """Basis gradients at reference points, shape (m, nld, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, C, exps = _reference_basis(self.degree)
        p, q = exps[:, 0], exps[:, 1]
        x, y = pts[:, 0][:, None], pts[:, 1][:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(p > 0, p * x ** np.maximum(p - 1, 0) * y ** q, 0.0)
            dy = np.where(q > 0, q * x ** p * y ** np.maximum(q - 1, 0), 0.0)
        return np.stack([dx @ C, dy @ C], axis=-1)

    def jacobian(self, element: int) -> np.ndarray:
        """Affine map Jacobian of an element (columns v1-v0, v2-v0)."""
        tri = self.mesh.triangle_coords(element)
        return np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])

    def phys_to_ref(self, element: int, pts) -> np.ndarray:
        """Map physical points inside an element to reference coordinates."""
        tri = self.mesh.triangle_coords(element)
        J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        return (np.atleast_2d(pts) - tri[0]) @ np.linalg.inv(J).T

    def boundary_dofs(self) -> np.ndarray:
        """Dofs on the domain boundary (empty for the discontinuous P0)."""
        if self.degree == 0:
            return np.zeros(0, dtype=np.int64)
        kn = self.degree * self.mesh.n
        idx = np.arange((kn + 1) ** 2)
        i, j = idx % (kn + 1), idx // (kn + 1)
        on = (i == 0) | (i == kn) | (j == 0) | (j == kn)
        return idx[on]


def build_scalar_space(mesh: CartesianMesh, degree: int) -> ScalarSpace:
    """Build the Pk space; dof ids follow the refined lattice row-major."""
    if degree not in (0, 1, 2, 3):
        raise ValueError(f"unsupported polynomial degree {degree}")
    n = mesh.n
    if degree == 0:
        centroids = mesh.triangle_coords(np.arange(mesh.num_triangles)).mean(axis=1)
        eldofs = np.arange(mesh.num_triangles, dtype=np.int64)[:, None]
        return ScalarSpace(mesh, 0, eldofs, centroids)

    k = degree
    kn = k * n
    x0, y0, x1, y1 = mesh.domain
    xs = np.linspace(x0, x1, kn + 1)
    ys = np.linspace(y0, y1, kn + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    dof_points = np.column_stack([X.ravel(), Y.ravel()])

    ab = np.array([(a, b) for b in range(k + 1) for a in range(k + 1 - b)])
    cells = np.arange(n * n)
    ci, cj = cells % n, cells // n
    # Lattice indices of the local nodes; lower triangle (SW,SE,NW) and
    # upper triangle (SE,NE,NW) of each cell.
    lo_x = k * ci[:, None] + ab[None, :, 0]
    lo_y = k * cj[:, None] + ab[None, :, 1]
    up_x = k * (ci[:, None] + 1) - ab[None, :, 1]
    up_y = k * cj[:, None] + ab[None, :, 0] + ab[None, :, 1]
    eldofs = np.empty((2 * n * n, len(ab)), dtype=np.int64)
    eldofs[0::2] = lo_y * (kn + 1) + lo_x
    eldofs[1::2] = up_y * (kn + 1) + up_x
    return ScalarSpace(mesh, k, eldofs, dof_points)


@dataclass(frozen=True)
class FictitiousDofMap:
    """Kept dofs of a background space for one side of the interface.

    R restricts a global coefficient vector to the kept dofs, E = R^T
    extends it back by zero; both are binary and R @ E is the identity.
    """

    space: ScalarSpace
    side: int
    kept: np.ndarray              # global dof ids, sorted
    global_to_kept: np.ndarray    # (ndofs,) int, -1 where dropped
    dirichlet: np.ndarray         # kept-local indices with u = 0 on the boundary

    @property
    def nkept(self) -> int:
        return len(self.kept)

    @property
    def R(self) -> sp.csr_matrix:
        m = self.nkept
        return sp.csr_matrix((np.ones(m), (np.arange(m), self.kept)),
                             shape=(m, self.space.ndofs))

    @property
    def E(self) -> sp.csr_matrix:
        return self.R.T.tocsr()

    def element_kept_dofs(self, element: int) -> np.ndarray:
        """Kept-local indices of an element's dofs (-1 where dropped)."""
        return self.global_to_kept[self.space.element_dofs[element]]


def build_fictitious(space: ScalarSpace, classification: ElementClassification,
                     side: int) -> FictitiousDofMap:
    """Keep every dof whose basis support meets the closure of one side.

    That is exactly the union of element dofs over elements classified as
    that side or as cut.
    """
    if side not in (PLUS, MINUS):
        raise ValueError(f"side must be PLUS or MINUS, got {side}")
    active = (classification.codes == side) | (classification.codes == CUT)
    if not active.any():
        raise ValueError(f"side {side:+d} of the interface contains no elements")
    kept = np.unique(space.element_dofs[active])
    g2k = np.full(space.ndofs, -1, dtype=np.int64)
    g2k[kept] = np.arange(len(kept))
    if side == PLUS:
        bdofs = space.boundary_dofs()
        dirichlet = g2k[bdofs[g2k[bdofs] >= 0]]
    else:
        dirichlet = np.zeros(0, dtype=np.int64)
    return FictitiousDofMap(space, side, kept, g2k, dirichlet)


@dataclass(frozen=True)
class TraceSpace:
    """Independent interface traces of a background space.

    Candidates are the dofs of cut elements; dependent or zero traces are
    eliminated with a pivoted rank factorization of the interface Gram
    matrix.
    """

    space: ScalarSpace
    kept: np.ndarray              # global dof ids of surviving traces
    global_to_kept: np.ndarray
    gram: np.ndarray              # survivor Gram matrix on the interface
    candidates: np.ndarray        # global dof ids considered

    @property
    def nkept(self) -> int:
        return len(self.kept)

    def element_kept_dofs(self, element: int) -> np.ndarray:
        return self.global_to_kept[self.space.element_dofs[element]]


def build_trace_space(space: ScalarSpace, decomp: CutDecomposition,
                      tol_rank: float = 1e-10) -> TraceSpace:
    """Select an independent basis of traces on the interface.

    Works on the weighted point-evaluation matrix B with rows
    sqrt(w_q) phi_j(x_q); its squared singular values are the eigenvalues
    of the Gram matrix G = B^T B, so columns are kept while the pivoted-QR
    diagonal satisfies (R_ii / R_00)^2 > tol_rank.
    """
    cut = decomp.cut_elements
    if len(cut) == 0:
        raise ValueError("interface cuts no element; no trace space")
    cand = np.unique(space.element_dofs[cut])
    c2l = np.full(space.ndofs, -1, dtype=np.int64)
    c2l[cand] = np.arange(len(cand))

    rows = []
    order = 2 * max(space.degree, 1) + 2
    for t in cut:
        rule = interface_rule(decomp, int(t), order)
        vals = space.ref_values(space.phys_to_ref(int(t), rule.points))
        block = np.zeros((len(rule.weights), len(cand)))
        block[:, c2l[space.element_dofs[t]]] = np.sqrt(rule.weights)[:, None] * vals
        rows.append(block)
    B = np.concatenate(rows)

    _, R, piv = scipy.linalg.qr(B, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if len(diag) == 0 or diag[0] == 0.0:
        raise ValueError("all candidate traces are numerically zero")
    nkeep = int(np.sum((diag / diag[0]) ** 2 > tol_rank))
    # The QR diagonal only approximates the spectrum near the cutoff;
    # trim in pivot order until the survivor Gram truly satisfies it.
    while nkeep > 1:
        Bk = B[:, c2l[cand[piv[:nkeep]]]]
        ev = np.linalg.eigvalsh(Bk.T @ Bk)
        if ev[0] > tol_rank * ev[-1]:
            break
        nkeep -= 1
    kept = np.sort(cand[piv[:nkeep]])
    g2k = np.full(space.ndofs, -1, dtype=np.int64)
    g2k[kept] = np.arange(len(kept))
    Bk = B[:, c2l[kept]]
    return TraceSpace(space, kept, g2k, Bk.T @ Bk, cand)


def interpolate(space: ScalarSpace, f) -> np.ndarray:
    """Nodal interpolation (k >= 1) or per-element mean (k = 0) of f.

    f maps an (m, 2) point array to (m,) values.
    """
    if space.degree >= 1:
        return np.asarray(f(space.dof_points), dtype=float)
    rp, rw = triangle_rule(2)
    tris = space.mesh.triangle_coords(np.arange(space.mesh.num_triangles))
    v0 = tris[:, 0]
    J = np.stack([tris[:, 1] - v0, tris[:, 2] - v0], axis=-1)
    pts = v0[:, None, :] + np.einsum("mab,qb->mqa", J, rp)
    vals = np.asarray(f(pts.reshape(-1, 2))).reshape(len(tris), -1)
    return (vals * rw).sum(axis=1) / rw.sum()


def interpolate_trace(tspace: TraceSpace, decomp: CutDecomposition, f,
                      order: int | None = None) -> np.ndarray:
    """L2(interface) projection of f onto the surviving traces."""
    space = tspace.space
    if order is None:
        order = 2 * max(space.degree, 1) + 2
    rhs = np.zeros(tspace.nkept)
    for t in decomp.cut_elements:
        rule = interface_rule(decomp, int(t), order)
        vals = space.ref_values(space.phys_to_ref(int(t), rule.points))
        loc = tspace.element_kept_dofs(int(t))
        fv = np.asarray(f(rule.points), dtype=float)
        for a, g in enumerate(loc):
            if g >= 0:
                rhs[g] += (rule.weights * fv * vals[:, a]).sum()
    return np.linalg.solve(tspace.gram, rhs)
