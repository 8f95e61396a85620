"""Analytic circle/ellipse level set: evaluation, normals, curvature,
edge roots and element classification against a mesh.

Convention: the level set is negative inside Omega^- and positive in
Omega^+; the reference unit normal points outward from Omega^-.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CartesianMesh

PLUS, MINUS, CUT = 1, -1, 0

# On-interface tolerance, relative to the domain diameter (unit square).
TOL_GAMMA = 1e-10 * np.sqrt(2.0)


class SingularGeometryError(ValueError):
    """Level-set gradient vanished where a normal was requested."""


class DegenerateTangencyError(ValueError):
    """Segment lies (numerically) on the interface."""


@dataclass(frozen=True)
class LevelSetGeometry:
    """Circle or axis-aligned ellipse interface.

    ``kind`` selects the evaluation formula; geometric quantities
    (normal, curvature, classification, roots) agree between a circle of
    radius R and the degenerate ellipse with both semi-axes R.
    """

    kind: str                      # "circle" | "ellipse"
    center: tuple[float, float]
    semiaxes: tuple[float, float]  # (R, R) for a circle

    def __post_init__(self):
        if self.kind not in ("circle", "ellipse"):
            raise ValueError(f"unknown level-set kind {self.kind!r}")
        a1, a2 = self.semiaxes
        if not (a1 > 0 and a2 > 0):
            raise ValueError(f"semi-axes must be positive, got {self.semiaxes}")
        if self.kind == "circle" and a1 != a2:
            raise ValueError("circle requires equal semi-axes")

    @classmethod
    def circle(cls, center, radius: float) -> "LevelSetGeometry":
        return cls("circle", tuple(center), (float(radius), float(radius)))

    @classmethod
    def ellipse(cls, center, semiaxes) -> "LevelSetGeometry":
        a1, a2 = semiaxes
        return cls("ellipse", tuple(center), (float(a1), float(a2)))

    @property
    def radius(self) -> float:
        return self.semiaxes[0]

    def check_inside(self, domain) -> None:
        """Reject interfaces whose bounding box touches the domain boundary."""
        x0, y0, x1, y1 = domain
        cx, cy = self.center
        a1, a2 = self.semiaxes
        if not (x0 < cx - a1 and cx + a1 < x1 and y0 < cy - a2 and cy + a2 < y1):
            raise ValueError(
                f"interface bounding box [{cx - a1}, {cx + a1}]x[{cy - a2}, {cy + a2}] "
                f"not strictly inside domain {tuple(domain)}")

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        if self.kind == "circle":
            R = self.semiaxes[0]
            return (d * d).sum(axis=-1) - R * R
        a = np.asarray(self.semiaxes)
        return ((d / a) ** 2).sum(axis=-1) - 1.0

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        if self.kind == "circle":
            return 2.0 * d
        a = np.asarray(self.semiaxes)
        return 2.0 * d / (a * a)

    def normal_curvature(self, x, tol: float = 1e-6):
        """Unit normal (outward from Omega^-) and curvature at on-interface x.

        Works on single points or (m, 2) arrays; x must satisfy
        |eval(x)| <= tol.
        """
        x = np.asarray(x, dtype=float)
        phi = self.eval(x)
        if np.any(np.abs(phi) > tol):
            raise ValueError(f"point not on interface: |levelset| up to {np.abs(phi).max():.3e}")
        g = self.gradient(x)
        gn = np.linalg.norm(g, axis=-1)
        if np.any(gn < 1e-14):
            raise SingularGeometryError("vanishing level-set gradient on interface")
        n = g / gn[..., None]
        a1, a2 = self.semiaxes
        d = x - np.asarray(self.center)
        q = (d[..., 0] / a1 ** 2) ** 2 + (d[..., 1] / a2 ** 2) ** 2
        kappa = -(1.0 / (a1 ** 2 * a2 ** 2)) * q ** (-1.5)
        return n, kappa

    def project(self, x) -> np.ndarray:
        """Radial projection onto the interface (scaling from the center)."""
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        d = x - c
        a = np.asarray(self.semiaxes)
        r = np.sqrt(((d / a) ** 2).sum(axis=-1))
        if np.any(r < 1e-14):
            raise SingularGeometryError("cannot project the center onto the interface")
        return c + d / r[..., None]

    def edge_roots(self, p0, p1, snap_tol: float = TOL_GAMMA) -> list[float]:
        """All t in [0, 1] with levelset(p0 + t (p1 - p0)) = 0.

        The restriction to a segment is an exact quadratic, solved in
        closed form.  Roots within ``snap_tol`` (in level-set value at
        the endpoints) snap to t = 0 / t = 1; a near-double root pair is
        merged to a single tangency root.
        """
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        c = np.asarray(self.center)
        a = np.asarray(self.semiaxes)
        u = (p0 - c) / a
        v = (p1 - p0) / a
        A = v @ v
        B = 2.0 * u @ v
        C = u @ u - 1.0
        # Scale-invariant smallness reference.
        scale = max(A, abs(B), abs(C), 1e-30)
        if A < 1e-14 * scale:
            if abs(B) < 1e-14 * scale:
                if abs(C) < 1e-12:
                    raise DegenerateTangencyError("segment lies on the interface")
                return []
            roots = [-C / B]
        else:
            disc = B * B - 4.0 * A * C
            if disc < 0.0:
                return []
            sq = np.sqrt(disc)
            # Citardauq form for the smaller-magnitude root.
            q = -0.5 * (B + np.copysign(sq, B))
            r1 = q / A
            r2 = C / q if q != 0.0 else r1
            roots = sorted({r1, r2})
        # Snap roots to endpoints where the endpoint value is on-interface.
        e0 = abs(self.eval(p0))
        e1 = abs(self.eval(p1))
        out = []
        for t in roots:
            if e0 < snap_tol and abs(t) < 1e-6:
                t = 0.0
            elif e1 < snap_tol and abs(t - 1.0) < 1e-6:
                t = 1.0
            if -1e-13 <= t <= 1.0 + 1e-13:
                out.append(min(max(t, 0.0), 1.0))
        # Merge a tangent double root.
        if len(out) == 2 and abs(out[1] - out[0]) < 1e-9:
            out = [0.5 * (out[0] + out[1])]
        return out


@dataclass(frozen=True)
class ElementClassification:
    """Per-triangle side codes: PLUS (+1), MINUS (-1) or CUT (0)."""

    codes: np.ndarray

    @property
    def plus(self) -> np.ndarray:
        return np.flatnonzero(self.codes == PLUS)

    @property
    def minus(self) -> np.ndarray:
        return np.flatnonzero(self.codes == MINUS)

    @property
    def cut(self) -> np.ndarray:
        return np.flatnonzero(self.codes == CUT)

    def counts(self) -> dict[str, int]:
        return {"plus": len(self.plus), "minus": len(self.minus), "cut": len(self.cut)}


def classify(mesh: CartesianMesh, geom: LevelSetGeometry,
             snap_tol: float = TOL_GAMMA) -> ElementClassification:
    """Classify every triangle against the interface.

    A triangle is CUT if its (snapped) vertex signs differ, if an edge
    carries an interior sign excursion, or if it contains the level-set
    minimum with a negative value (interface entirely inside).
    """
    geom.check_inside(mesh.domain)
    vals = geom.eval(mesh.vertices)
    signs = np.where(np.abs(vals) < snap_tol, 0, np.sign(vals)).astype(np.int8)
    tri_signs = signs[mesh.triangles]
    has_pos = (tri_signs > 0).any(axis=1)
    has_neg = (tri_signs < 0).any(axis=1)
    codes = np.where(has_pos & ~has_neg, PLUS,
                     np.where(has_neg & ~has_pos, MINUS, CUT)).astype(np.int8)

    # Same-sign triangles near the interface may still be crossed: check
    # edge-interior excursions on a band of candidate triangles.
    tri_pts = mesh.vertices[mesh.triangles]
    cen = np.asarray(geom.center)
    a = np.asarray(geom.semiaxes)
    d = (tri_pts - cen) / a
    r = np.sqrt((d * d).sum(axis=-1))          # scaled radius per vertex
    near = (codes != CUT) & (np.abs(r - 1.0).min(axis=1) < 2.5 * mesh.h / a.min())
    for t in np.flatnonzero(near):
        pts = tri_pts[t]
        crossed = False
        for e in range(3):
            roots = geom.edge_roots(pts[e], pts[(e + 1) % 3], snap_tol)
            if any(1e-9 < tt < 1.0 - 1e-9 for tt in roots):
                crossed = True
                break
        if crossed:
            codes[t] = CUT

    # Two vertices exactly on the interface: the arc between them may
    # bulge off the connecting chord into an element whose vertex signs
    # are otherwise single-signed (lens cut).
    zero_pairs = (tri_signs == 0).sum(axis=1) == 2
    for t in np.flatnonzero(zero_pairs & (codes != CUT)):
        pts = tri_pts[t]
        zi = np.flatnonzero(tri_signs[t] == 0)
        mid = 0.5 * (pts[zi[0]] + pts[zi[1]])
        arc_mid = geom.project(mid)
        v0, v1, v2 = pts
        T = np.column_stack([v1 - v0, v2 - v0])
        try:
            lam = np.linalg.solve(T, arc_mid - v0)
        except np.linalg.LinAlgError:
            continue
        bar = np.array([1.0 - lam.sum(), lam[0], lam[1]])
        if (bar > 1e-10).all():
            codes[t] = CUT

    # Interface entirely inside one triangle (level-set minimum at the center).
    if not (codes == CUT).any():
        from .mesh import locate_point
        t, _ = locate_point(mesh, cen)
        codes[t] = CUT

    return ElementClassification(codes)
