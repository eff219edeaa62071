"""Quadrature rules on the reference triangle and the unit interval."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def triangle_rule(order: int):
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree ``order``.  Returns ``(points, weights)``
    with ``points`` of shape (nq, 2); weights sum to 1/2.
    """
    order = max(int(order), 4)
    n = (order + 2) // 2 + 1
    g, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (g + 1.0)
    ws = 0.5 * w
    xi, eta = np.meshgrid(s, s, indexing="ij")
    wxi, weta = np.meshgrid(ws, ws, indexing="ij")
    x = xi * (1.0 - eta)
    y = eta
    weights = wxi * weta * (1.0 - eta)
    pts = np.column_stack([x.ravel(), y.ravel()])
    pts.setflags(write=False)
    weights = weights.ravel()
    weights.setflags(write=False)
    return pts, weights


@lru_cache(maxsize=None)
def line_rule(order: int):
    """Gauss-Legendre rule on [0, 1] exact for degree ``order``."""
    n = max(int(order) // 2 + 1, 1)
    g, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (g + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w
