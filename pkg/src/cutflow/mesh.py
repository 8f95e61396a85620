"""Fixed structured triangular mesh of an axis-aligned rectangle.

The mesh never changes with the interface: every square cell is split
along the "/" diagonal, giving two congruent triangle orientations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

UNIT_SQUARE = (0.0, 0.0, 1.0, 1.0)


class OutOfDomainError(ValueError):
    """Point lies outside the closed mesh domain."""


@dataclass(frozen=True)
class CartesianMesh:
    """Structured triangulation of a rectangle, 2*n^2 triangles.

    Triangles are counter-clockwise.  Cell (i, j) holds triangles
    2*(j*n+i) ("lower", vertices SW/SE/NW) and 2*(j*n+i)+1 ("upper",
    vertices SE/NE/NW); both lean on the "/" diagonal.
    """

    domain: tuple[float, float, float, float]
    n: int
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3) int
    edges: np.ndarray             # (ne, 2) int, sorted pairs
    edge_triangles: np.ndarray    # (ne, 2) int, -1 for boundary
    h: float = field(init=False, default=0.0)

    def __post_init__(self):
        dx = (self.domain[2] - self.domain[0]) / self.n
        dy = (self.domain[3] - self.domain[1]) / self.n
        object.__setattr__(self, "h", float(np.hypot(dx, dy)))

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def cell_size(self) -> tuple[float, float]:
        return ((self.domain[2] - self.domain[0]) / self.n,
                (self.domain[3] - self.domain[1]) / self.n)

    def triangle_coords(self, t) -> np.ndarray:
        """Vertex coordinates of triangle(s) t, shape (..., 3, 2)."""
        return self.vertices[self.triangles[t]]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def dump_csv(self, vertex_path: str, triangle_path: str) -> None:
        with open(vertex_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["vertex", "x", "y"])
            for i, (x, y) in enumerate(self.vertices):
                w.writerow([i, repr(x), repr(y)])
        with open(triangle_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["triangle", "v0", "v1", "v2"])
            for i, tri in enumerate(self.triangles):
                w.writerow([i, *tri])


def build_mesh(n: int, domain: tuple[float, float, float, float] = UNIT_SQUARE) -> CartesianMesh:
    """Build the structured triangular mesh with n subdivisions per axis."""
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    x0, y0, x1, y1 = domain
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain}")

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i = I.ravel()
    j = J.ravel()
    sw, se, nw, ne = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
    lower = np.column_stack([sw, se, nw])
    upper = np.column_stack([se, ne, nw])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    edge_map: dict[tuple[int, int], list[int]] = {}
    for t, tri in enumerate(triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_map.setdefault(key, []).append(t)
    edges = np.array(sorted(edge_map), dtype=np.int64)
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    for k, key in enumerate(map(tuple, edges)):
        inc = edge_map[key]
        edge_triangles[k, :len(inc)] = inc

    return CartesianMesh(tuple(domain), n, vertices, triangles, edges, edge_triangles)


def locate_point(mesh: CartesianMesh, x) -> tuple[int, np.ndarray]:
    """Find the triangle containing x and its barycentric coordinates."""
    x = np.asarray(x, dtype=float)
    x0, y0, x1, y1 = mesh.domain
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    if not (x0 - tol <= x[0] <= x1 + tol and y0 - tol <= x[1] <= y1 + tol):
        raise OutOfDomainError(f"point {tuple(x)} outside domain {mesh.domain}")

    dx, dy = mesh.cell_size
    i = min(int((x[0] - x0) / dx), mesh.n - 1)
    j = min(int((x[1] - y0) / dy), mesh.n - 1)
    xi = (x[0] - (x0 + i * dx)) / dx
    eta = (x[1] - (y0 + j * dy)) / dy
    t = 2 * (j * mesh.n + i) + (0 if xi + eta <= 1.0 else 1)
    lam = barycentric(mesh.triangle_coords(t), x)
    # Clean up roundoff at cell boundaries.
    if lam.min() < -1e-12:
        t ^= 1
        lam = barycentric(mesh.triangle_coords(t), x)
    lam = np.clip(lam, 0.0, 1.0)
    return t, lam / lam.sum()


def barycentric(tri: np.ndarray, x) -> np.ndarray:
    """Barycentric coordinates of x in triangle tri (3,2)."""
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    l12 = np.linalg.solve(T, np.asarray(x, dtype=float) - tri[0])
    return np.array([1.0 - l12[0] - l12[1], l12[0], l12[1]])
