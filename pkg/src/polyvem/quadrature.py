"""Edge and polygon quadrature rules.

Edge rules live on the unit parameter interval [0, 1]; polygon rules are
built by sub-triangulating each cell and mapping a collapsed Gauss rule onto
every triangle.  Batched variants work on stacks of cells with a common
vertex count, shape ``(n_cells, n_vertices, 2)``.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from .geometry import centroid, signed_area

__all__ = [
    "EdgeRule",
    "PolygonRule",
    "gauss_legendre",
    "gauss_lobatto",
    "triangle_rule",
    "polygon_rule",
    "batch_polygon_rule",
    "triangulate",
    "batch_triangulate",
    "QuadratureError",
]


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeRule:
    """Nodes in [0, 1] along an oriented edge and weights summing to its length."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.dot(self.weights, values)


@dataclass(frozen=True)
class PolygonRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.dot(self.weights, values)


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def _legendre_ref(n):
    x, w = legendre.leggauss(n)
    return _frozen(0.5 * (x + 1.0)), _frozen(0.5 * w)


@lru_cache(maxsize=None)
def _lobatto_ref(n):
    if n == 2:
        x = np.array([-1.0, 1.0])
    else:
        inner = legendre.Legendre.basis(n - 1).deriv().roots()
        x = np.concatenate(([-1.0], np.sort(inner.real), [1.0]))
    p = legendre.legval(x, [0] * (n - 1) + [1])
    w = 2.0 / (n * (n - 1) * p**2)
    return _frozen(0.5 * (x + 1.0)), _frozen(0.5 * w)


def gauss_legendre(n, length=1.0):
    """n-point Gauss-Legendre rule on [0, 1], exact to degree 2n-1."""
    if int(n) != n or n < 1:
        raise QuadratureError(f"gauss_legendre needs n >= 1, got {n}")
    t, w = _legendre_ref(int(n))
    return EdgeRule(t, w * length)


def gauss_lobatto(n, length=1.0):
    """n-point Gauss-Lobatto rule on [0, 1] (endpoints included), exact to degree 2n-3."""
    if int(n) != n or n < 2:
        raise QuadratureError(f"gauss_lobatto needs n >= 2, got {n}")
    t, w = _lobatto_ref(int(n))
    return EdgeRule(t, w * length)


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1).

    Returns ``(points, weights)`` with weights summing to 1/2; exact for
    bivariate polynomials of total degree ``degree``.
    """
    n = max(1, ceil((degree + 1) / 2))
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (xj + 1.0)
    wu = 0.25 * wj
    v, wv = _legendre_ref(n)
    a = np.repeat(u, n)
    b = np.outer(1.0 - u, v).ravel()
    w = np.outer(wu, wv).ravel()
    return _frozen(np.column_stack((a, b))), _frozen(w)


def _ear_clip(poly):
    """Ear-clipping triangulation of a simple CCW polygon, as vertex index triples."""
    idx = list(range(len(poly)))
    tris = []
    guard = 0
    while len(idx) > 3:
        m = len(idx)
        for j in range(m):
            i0, i1, i2 = idx[j - 1], idx[j], idx[(j + 1) % m]
            a, b, c = poly[i0], poly[i1], poly[i2]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 0:
                continue
            ok = True
            for q in idx:
                if q in (i0, i1, i2):
                    continue
                p = poly[q]
                d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
                d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
                d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
                if d1 >= 0 and d2 >= 0 and d3 >= 0:
                    ok = False
                    break
            if ok:
                tris.append((i0, i1, i2))
                del idx[j]
                break
        else:
            raise QuadratureError("ear clipping failed: polygon is degenerate or not simple")
        guard += 1
        if guard > len(poly):
            raise QuadratureError("ear clipping did not terminate")
    tris.append(tuple(idx))
    return tris


def batch_triangulate(verts):
    """Sub-triangles for a stack of cells, shape ``(n_cells, n_vertices, 3, 2)``.

    The centroid fan is used wherever all fan triangles have positive area.
    Other cells are ear-clipped; their two spare slots are filled with
    degenerate triangles carrying zero area.
    """
    verts = np.asarray(verts, dtype=float)
    ne, nv, _ = verts.shape
    c = centroid(verts)
    nxt = np.roll(verts, -1, axis=1)
    tris = np.stack((np.broadcast_to(c[:, None, :], verts.shape), verts, nxt), axis=2)
    fan_area = signed_area(tris)
    scale = np.abs(signed_area(verts))[:, None]
    bad = np.nonzero(np.any(fan_area <= 1e-14 * scale, axis=1))[0]
    if len(bad):
        tris = tris.copy()
        for e in bad:
            ear = _ear_clip(verts[e])
            t = verts[e][np.array(ear)]
            tris[e, : len(ear)] = t
            tris[e, len(ear):] = verts[e][0]
    return tris


def triangulate(cell):
    return batch_triangulate(np.asarray(cell, dtype=float)[None])[0]


def batch_polygon_rule(verts, degree):
    """Points ``(n_cells, n_q, 2)`` and weights ``(n_cells, n_q)`` exact to ``degree``."""
    tris = batch_triangulate(verts)
    ref, rw = triangle_rule(degree)
    a = tris[:, :, 0, :]
    e1 = tris[:, :, 1, :] - a
    e2 = tris[:, :, 2, :] - a
    jac = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    pts = (a[:, :, None, :] + ref[None, None, :, 0:1] * e1[:, :, None, :]
           + ref[None, None, :, 1:2] * e2[:, :, None, :])
    w = jac[:, :, None] * rw[None, None, :]
    ne = tris.shape[0]
    return pts.reshape(ne, -1, 2), w.reshape(ne, -1)


def polygon_rule(cell, degree):
    """Quadrature rule on one simple CCW polygon, exact to total degree ``degree``."""
    cell = np.asarray(cell, dtype=float)
    if cell.ndim != 2 or cell.shape[0] < 3:
        raise QuadratureError("polygon needs at least three vertices")
    if signed_area(cell) <= 0:
        raise QuadratureError("polygon must be counter-clockwise with positive area")
    if degree < 0:
        raise QuadratureError("degree must be nonnegative")
    pts, w = batch_polygon_rule(cell[None], degree)
    return PolygonRule(pts[0], w[0])
