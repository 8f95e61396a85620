"""Sparse direct solution of the assembled saddle-point system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BlockSaddleSystem, DiscreteSetup
from .levelset import MINUS, PLUS


class SingularSystemError(RuntimeError):
    """Factorization failed or the residual could not be reduced."""


@dataclass
class FieldSolution:
    """Solution vector with block accessors in background numbering."""

    setup: DiscreteSetup
    x: np.ndarray
    residual: float

    def _blockvec(self, name: str) -> np.ndarray:
        return self.x[self.setup.block_slice(name)]

    def u(self, side: int) -> np.ndarray:
        """Velocity coefficients extended to the background space, (2, N)."""
        s = self.setup
        fm = s.Vmap[side]
        v = self._blockvec(s.ublock(side)).reshape(2, fm.nkept)
        out = np.zeros((2, s.V.ndofs))
        out[:, fm.kept] = v
        return out

    def p(self, side: int) -> np.ndarray:
        """Pressure coefficients extended to the background space, (Nq,)."""
        s = self.setup
        fm = s.Qmap[side]
        out = np.zeros(s.Q.ndofs)
        out[fm.kept] = self._blockvec(s.pblock(side))
        return out

    def lam(self, side: int) -> np.ndarray:
        """Multiplier coefficients on the surviving trace dofs, (2, nW)."""
        s = self.setup
        return self._blockvec(s.lblock(side)).reshape(2, s.W.nkept)

    def phi(self) -> np.ndarray:
        """Interface velocity coefficients, (2, nZ)."""
        return self._blockvec("phi").reshape(2, self.setup.Z.nkept)

    @property
    def mean_multiplier(self) -> float:
        return float(self._blockvec("mean")[0])


class BorderedLU:
    """LU factorization that isolates one dense bordering row/column.

    The zero-mean pressure constraint couples one unknown to every
    pressure dof; that dense row destroys the fill-reducing ordering and
    inflates the factor memory by an order of magnitude on fine meshes.
    Here the dense border column c at index mu is swapped for a sparse
    single-dof pin a = e_j before factorizing, and the exact solution of
    the original matrix is recovered with a rank-2 Woodbury correction:
    M = A + (c - a) e_mu^T + e_mu (c - a)^T.
    """

    def __init__(self, M: sp.spmatrix, border_index: int):
        n = M.shape[0]
        mu = border_index
        Mcsc = M.tocsc()
        c = np.asarray(Mcsc[:, mu].todense()).ravel()
        c[mu] = 0.0
        if not c.any():
            raise SingularSystemError("empty bordering column")
        j = int(np.argmax(np.abs(c)))
        a = np.zeros(n)
        a[j] = 1.0
        coo = Mcsc.tocoo()
        keep = (coo.row != mu) & (coo.col != mu)
        rows = np.concatenate([coo.row[keep], [mu, j]])
        cols = np.concatenate([coo.col[keep], [j, mu]])
        vals = np.concatenate([coo.data[keep], [1.0, 1.0]])
        A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystemError(f"LU factorization failed: {exc}") from exc
        d = c - a
        e_mu = np.zeros(n)
        e_mu[mu] = 1.0
        U = np.column_stack([d, e_mu])
        V = np.column_stack([e_mu, d])
        AinvU = self._lu.solve(U)
        self._U = U
        self._V = V
        self._AinvU = AinvU
        self._core = np.linalg.inv(np.eye(2) + V.T @ AinvU)

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = self._lu.solve(b)
        return y - self._AinvU @ (self._core @ (self._V.T @ y))


def make_solver(M: sp.spmatrix, border_index: int | None = None):
    """Factor M; with a border index, order around the dense row."""
    if border_index is None:
        try:
            return spla.splu(M.tocsc()).solve
        except RuntimeError as exc:
            raise SingularSystemError(f"LU factorization failed: {exc}") from exc
    return BorderedLU(M, border_index).solve


def solve(system: BlockSaddleSystem, rhs: np.ndarray,
          tol: float = 1e-10, max_refine: int = 3) -> FieldSolution:
    """Direct LU solve with a few steps of iterative refinement."""
    M = system.matrix.tocsc()
    b = np.array(rhs, dtype=float)
    apply_inv = make_solver(M, system.setup.offsets["mean"])
    x = apply_inv(b)
    if not np.isfinite(x).all():
        raise SingularSystemError("solution contains non-finite entries")
    scale = max(float(np.abs(b).max()), 1e-30)
    res = float(np.abs(M @ x - b).max()) / scale
    for _ in range(max_refine):
        if res <= tol:
            break
        x = x + apply_inv(b - M @ x)
        res = float(np.abs(M @ x - b).max()) / scale
    if not np.isfinite(res) or res > 1e-6:
        raise SingularSystemError(
            f"residual {res:.3e} after refinement; system is numerically singular")
    return FieldSolution(system.setup, x, res)
