"""Reference quadrature rules: Gauss-Legendre on [0,1] and collapsed
product rules on the unit reference triangle."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre_01(npts: int):
    """Gauss-Legendre points/weights mapped to [0,1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(order: int):
    """Quadrature on the reference triangle {x,y >= 0, x+y <= 1}.

    Collapsed tensor rule: x = s, y = t(1-s) with Jacobian (1-s).  A
    polynomial of total degree <= order yields an integrand of degree
    <= order+1 in s and <= order in t, so the rule below is exact.
    All weights are positive.

    Returns (points (m,2), weights (m,)); weights sum to 1/2.
    """
    if order < 1:
        order = 1
    ns = (order + 3) // 2
    nt = (order + 2) // 2
    s, ws = gauss_legendre_01(ns)
    t, wt = gauss_legendre_01(nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    WS, WT = np.meshgrid(ws, wt, indexing="ij")
    x = S
    y = T * (1.0 - S)
    w = WS * WT * (1.0 - S)
    pts = np.column_stack([x.ravel(), y.ravel()])
    return pts, w.ravel()
