"""Decomposition of cut triangles into signed sub-triangles and interface
segments, with quadrature over the two sides and over the interface."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .levelset import (CUT, MINUS, PLUS, TOL_GAMMA, ElementClassification,
                       LevelSetGeometry)
from .mesh import CartesianMesh, barycentric
from .quadrature import gauss_legendre_01, triangle_rule

# Chord-vs-arc sagitta tolerance, as a fraction of h^2.  Bounds the
# geometric area defect well below the 1e-5 relative target on the
# reference circle configuration.
TOL_ARC_FACTOR = 1e-3


class UnsupportedTopologyError(ValueError):
    """Cut pattern not handled (more than one interface arc per triangle)."""


@dataclass
class CutCell:
    """Signed sub-triangles and interface polylines of one cut triangle.

    Almost always there is a single interface arc; a triangle grazed by
    the interface near two of its vertices can carry two.
    """

    element: int
    tris_plus: np.ndarray       # (m+, 3, 2)
    tris_minus: np.ndarray      # (m-, 3, 2)
    arcs: list[np.ndarray]      # each (k, 2), ordered points on the interface


@dataclass
class CutDecomposition:
    """Per-element signed sub-simplices and interface segments."""

    mesh: CartesianMesh
    geom: LevelSetGeometry
    classification: ElementClassification
    cells: dict[int, CutCell]
    tol_arc: float

    @property
    def cut_elements(self) -> np.ndarray:
        return self.classification.cut

    def side_area(self, side: int) -> float:
        """Total area of Omega^side as represented by the decomposition."""
        areas = self.mesh.areas()
        total = areas[self.classification.codes == side].sum()
        key = "tris_plus" if side == PLUS else "tris_minus"
        for cell in self.cells.values():
            total += _tri_areas(getattr(cell, key)).sum()
        return float(total)

    def interface_length(self) -> float:
        total = 0.0
        for cell in self.cells.values():
            for arc in cell.arcs:
                seg = np.diff(arc, axis=0)
                total += np.linalg.norm(seg, axis=1).sum()
        return float(total)

    def dump_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["element", "kind", "x0", "y0", "x1", "y1", "x2", "y2"])
            for cell in self.cells.values():
                for tag, tris in (("plus", cell.tris_plus), ("minus", cell.tris_minus)):
                    for tri in tris:
                        w.writerow([cell.element, tag, *tri.ravel()])
                for arc in cell.arcs:
                    for p0, p1 in zip(arc[:-1], arc[1:]):
                        w.writerow([cell.element, "segment", *p0, *p1, "", ""])


@dataclass
class QuadratureRule:
    """Quadrature points/weights; interface rules also carry (n, kappa)."""

    points: np.ndarray                      # (m, 2)
    weights: np.ndarray                     # (m,)
    normals: np.ndarray | None = None       # (m, 2)
    curvatures: np.ndarray | None = None    # (m,)

    @classmethod
    def empty(cls) -> "QuadratureRule":
        return cls(np.zeros((0, 2)), np.zeros(0))


def _tri_areas(tris: np.ndarray) -> np.ndarray:
    if len(tris) == 0:
        return np.zeros(0)
    d1 = tris[:, 1] - tris[:, 0]
    d2 = tris[:, 2] - tris[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _refine_arc(geom: LevelSetGeometry, p0: np.ndarray, p1: np.ndarray,
                tol_arc: float, depth: int = 0) -> list[np.ndarray]:
    """Points strictly between p0 and p1 on the interface, chord sagitta
    below tol_arc."""
    if depth > 24:
        raise UnsupportedTopologyError("arc refinement did not converge")
    mid = geom.project(0.5 * (p0 + p1))
    sagitta = np.linalg.norm(mid - 0.5 * (p0 + p1))
    if sagitta <= tol_arc and depth > 0:
        return []
    return (_refine_arc(geom, p0, mid, tol_arc, depth + 1) + [mid]
            + _refine_arc(geom, mid, p1, tol_arc, depth + 1))


def _polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _fan_triangulate(poly: list[np.ndarray], element: int) -> np.ndarray:
    """Ear-clip a simple CCW polygon into positively oriented triangles."""
    pts = np.asarray(poly, dtype=float)
    if _polygon_area(pts) < 0:
        pts = pts[::-1]
    idx = list(range(len(pts)))
    tris: list[np.ndarray] = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(pts):
            raise UnsupportedTopologyError(f"ear clipping failed in element {element}")
        m = len(idx)
        clipped = False
        for k in range(m):
            i0, i1, i2 = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if area2 <= 1e-16:
                if abs(area2) <= 1e-16:
                    # Collinear sliver: drop the middle vertex.
                    idx.pop(k)
                    clipped = True
                    break
                continue
            if _ear_contains_other(pts, idx, i0, i1, i2):
                continue
            tris.append(np.stack([a, b, c]))
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            raise UnsupportedTopologyError(f"no ear found in element {element}")
    if len(idx) == 3:
        tri = pts[idx]
        if _tri_areas(tri[None])[0] > 1e-16:
            tris.append(tri)
    if not tris:
        return np.zeros((0, 3, 2))
    out = np.stack(tris)
    if (_tri_areas(out) <= 0).any():
        raise UnsupportedTopologyError(f"degenerate sub-triangle in element {element}")
    return out


def _ear_contains_other(pts: np.ndarray, idx: list[int], i0: int, i1: int, i2: int) -> bool:
    a, b, c = pts[i0], pts[i1], pts[i2]
    for j in idx:
        if j in (i0, i1, i2):
            continue
        p = pts[j]
        s0 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        s1 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
        s2 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
        if s0 >= -1e-16 and s1 >= -1e-16 and s2 >= -1e-16:
            return True
    return False


def decompose(mesh: CartesianMesh, geom: LevelSetGeometry,
              classification: ElementClassification,
              tol_arc: float | None = None) -> CutDecomposition:
    """Split every cut triangle along the interface.

    The curved arc between the two boundary crossing points is refined by
    recursive bisection (projected chord midpoints) until the sagitta is
    below tol_arc; the two resulting polygons are fan-triangulated.
    """
    if tol_arc is None:
        tol_arc = TOL_ARC_FACTOR * mesh.h ** 2
    cells: dict[int, CutCell] = {}
    for t in classification.cut:
        cells[t] = _decompose_element(mesh, geom, int(t), tol_arc)
    return CutDecomposition(mesh, geom, classification, cells, tol_arc)


def _decompose_element(mesh: CartesianMesh, geom: LevelSetGeometry,
                       element: int, tol_arc: float) -> CutCell:
    pts = mesh.triangle_coords(element)
    svals, P = _perimeter_crossings(geom, pts, element)
    m = len(svals)

    # Sign of each perimeter interval (svals[k], svals[k+1]); drop
    # tangency touch points that do not flip the sign.
    sgn = _interval_signs(geom, pts, svals)
    keep = [k for k in range(m) if sgn[k - 1] != sgn[k]]
    if len(keep) < m:
        svals = [svals[k] for k in keep]
        P = [P[k] for k in keep]
        m = len(svals)
        sgn = _interval_signs(geom, pts, svals)
    if m == 0 or m % 2 == 1 or any(sgn[k - 1] == sgn[k] for k in range(m)):
        raise UnsupportedTopologyError(
            f"element {element}: unsupported crossing pattern "
            f"({m} crossings, interval signs {sgn})")

    partner = _pair_arcs(geom, pts, P, element)

    arcs: list[np.ndarray] = []
    polys_plus = _trace_side(geom, pts, svals, P, sgn, partner, PLUS, tol_arc, None)
    polys_minus = _trace_side(geom, pts, svals, P, sgn, partner, MINUS, tol_arc, arcs)

    tris_plus = [_fan_triangulate(poly, element) for poly in polys_plus]
    tris_minus = [_fan_triangulate(poly, element) for poly in polys_minus]
    plus = np.concatenate([t for t in tris_plus if len(t)] or [np.zeros((0, 3, 2))])
    minus = np.concatenate([t for t in tris_minus if len(t)] or [np.zeros((0, 3, 2))])
    return CutCell(element, plus, minus, arcs)


def _perimeter_crossings(geom: LevelSetGeometry, pts: np.ndarray,
                         element: int) -> tuple[list[float], list[np.ndarray]]:
    """Interface crossings on the triangle perimeter, parameter s in [0, 3)."""
    crossings: list[tuple[float, np.ndarray]] = []
    for e in range(3):
        p0, p1 = pts[e], pts[(e + 1) % 3]
        for t in geom.edge_roots(p0, p1):
            if t >= 1.0 - 1e-13:
                continue  # counted as t=0 of the next edge
            crossings.append((e + t, p0 + t * (p1 - p0)))
    # A vertex sitting exactly on the interface is a crossing even when
    # both incident edges are tangent there (the closed-form quadratic
    # can miss the grazing root to rounding).  Duplicates are merged
    # below; touch points that do not flip the perimeter sign are
    # dropped by the caller.
    for e in range(3):
        if abs(geom.eval(pts[e])) < TOL_GAMMA:
            crossings.append((float(e), pts[e]))
    # Merge duplicates (vertex crossings seen from both incident edges).
    crossings.sort(key=lambda c: c[0])
    merged: list[tuple[float, np.ndarray]] = []
    for s, p in crossings:
        if merged and (s - merged[-1][0]) % 3.0 < 1e-10:
            continue
        merged.append((s, p))
    if len(merged) >= 2 and (merged[0][0] - merged[-1][0]) % 3.0 < 1e-10:
        merged.pop()
    return [s for s, _ in merged], [p for _, p in merged]


def _perimeter_point(pts: np.ndarray, s: float) -> np.ndarray:
    s = s % 3.0
    e = min(int(s), 2)
    t = s - e
    return pts[e] + t * (pts[(e + 1) % 3] - pts[e])


def _interval_signs(geom: LevelSetGeometry, pts: np.ndarray,
                    svals: list[float]) -> list[int]:
    """Level-set sign of each perimeter interval, by sampling its interior."""
    m = len(svals)
    sgn = []
    for k in range(m):
        s0 = svals[k]
        span = (svals[(k + 1) % m] - s0) % 3.0
        if m == 1:
            span = 3.0
        samples = np.array([_perimeter_point(pts, s0 + f * span)
                            for f in (0.25, 0.5, 0.75)])
        vals = geom.eval(samples)
        sgn.append(PLUS if vals[np.argmax(np.abs(vals))] > 0 else MINUS)
    return sgn


def _pair_arcs(geom: LevelSetGeometry, pts: np.ndarray, P: list[np.ndarray],
               element: int) -> list[int]:
    """Pair crossings connected by an interface arc inside the triangle.

    Crossings are ordered by angle around the interface; consecutive
    pairs alternate between arcs inside and outside the triangle.
    """
    c = np.asarray(geom.center)
    a = np.asarray(geom.semiaxes)
    pts_arr = np.asarray(P)
    u = (pts_arr - c) / a
    theta = np.arctan2(u[:, 1], u[:, 0])
    order = np.argsort(theta)
    m = len(P)
    partner = [-1] * m
    for k in range(m):
        i, j = order[k], order[(k + 1) % m]
        dth = (theta[j] - theta[i]) % (2.0 * np.pi)
        if m == 2 and k == 1 and partner[i] != -1:
            continue
        th_mid = theta[i] + 0.5 * dth
        mid = c + a * np.array([np.cos(th_mid), np.sin(th_mid)])
        if barycentric(pts, mid).min() >= -1e-12:
            if partner[i] != -1 or partner[j] != -1:
                raise UnsupportedTopologyError(
                    f"element {element}: inconsistent interface arc pairing")
            partner[i] = j
            partner[j] = i
    if any(p == -1 for p in partner):
        raise UnsupportedTopologyError(
            f"element {element}: interface arc pairing incomplete")
    return partner


def _trace_side(geom: LevelSetGeometry, pts: np.ndarray, svals: list[float],
                P: list[np.ndarray], sgn: list[int], partner: list[int],
                side: int, tol_arc: float,
                arcs_out: list[np.ndarray] | None) -> list[list[np.ndarray]]:
    """Trace the boundary polygons of one side of a cut triangle.

    Walks perimeter intervals of the requested sign counter-clockwise and
    switches to the paired interface arc at each crossing.
    """
    m = len(svals)
    todo = {k for k in range(m) if sgn[k] == side}
    polys: list[list[np.ndarray]] = []
    while todo:
        k0 = min(todo)
        poly: list[np.ndarray] = []
        k = k0
        for _ in range(m + 1):
            todo.discard(k)
            j = (k + 1) % m
            poly.append(P[k])
            poly.extend(_boundary_chain(pts, svals[k], svals[j]))
            arc = [P[j]] + _refine_arc(geom, P[j], P[partner[j]], tol_arc) + [P[partner[j]]]
            poly.append(P[j])
            poly.extend(arc[1:-1])
            if arcs_out is not None:
                arcs_out.append(np.asarray(arc))
            k = partner[j]
            if k == k0:
                break
            if sgn[k] != side:
                raise UnsupportedTopologyError("inconsistent region trace")
        else:
            raise UnsupportedTopologyError("region trace did not close")
        polys.append(poly)
    return polys


def _boundary_chain(pts: np.ndarray, s_from: float, s_to: float) -> list[np.ndarray]:
    """Triangle vertices strictly between perimeter parameters s_from -> s_to
    (walking forward, wrapping mod 3)."""
    span = (s_to - s_from) % 3.0
    out = []
    s = np.floor(s_from + 1e-10) + 1.0
    for _ in range(3):
        if (s - s_from) % 3.0 >= span - 1e-10 or span < 1e-10:
            break
        out.append(pts[int(round(s)) % 3])
        s += 1.0
    return out


def volume_rule(decomp: CutDecomposition, element: int, side: int,
                order: int) -> QuadratureRule:
    """Quadrature over (Omega^side intersect T), exact to ``order`` on each
    sub-triangle."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    code = decomp.classification.codes[element]
    if code == CUT:
        cell = decomp.cells[element]
        tris = cell.tris_plus if side == PLUS else cell.tris_minus
    elif code == side:
        tris = decomp.mesh.triangle_coords(element)[None]
    else:
        return QuadratureRule.empty()
    if len(tris) == 0:
        return QuadratureRule.empty()
    return map_rule_to_triangles(tris, order)


def map_rule_to_triangles(tris: np.ndarray, order: int) -> QuadratureRule:
    """Affine map of the reference rule onto a batch of triangles (m,3,2)."""
    rp, rw = triangle_rule(order)
    v0 = tris[:, 0]
    J = np.stack([tris[:, 1] - v0, tris[:, 2] - v0], axis=-1)  # (m,2,2)
    pts = v0[:, None, :] + np.einsum("mab,qb->mqa", J, rp)
    areas = _tri_areas(tris)
    w = rw[None, :] * (2.0 * areas)[:, None]
    return QuadratureRule(pts.reshape(-1, 2), w.ravel())


def interface_rule(decomp: CutDecomposition, element: int, order: int) -> QuadratureRule:
    """Gauss rule on the interface polyline of a cut triangle.

    Points are projected onto the exact interface and carry the analytic
    (normal, curvature) there; weights are chord arclength weights.
    """
    cell = decomp.cells.get(element)
    if cell is None:
        raise ValueError(f"element {element} is not cut")
    npts = max(1, (order + 2) // 2)
    gx, gw = gauss_legendre_01(npts)
    p0 = np.concatenate([arc[:-1] for arc in cell.arcs])
    p1 = np.concatenate([arc[1:] for arc in cell.arcs])
    seg = p1 - p0
    lengths = np.linalg.norm(seg, axis=1)
    pts = (p0[:, None, :] + gx[None, :, None] * seg[:, None, :]).reshape(-1, 2)
    w = (lengths[:, None] * gw[None, :]).ravel()
    pts = decomp.geom.project(pts)
    n, kappa = decomp.geom.normal_curvature(pts, tol=1e-6)
    return QuadratureRule(pts, w, n, kappa)
