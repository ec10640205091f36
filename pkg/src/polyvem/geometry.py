"""Vectorised polygon geometry; all functions accept ``(..., n_vertices, 2)``."""

import numpy as np


def signed_area(poly):
    x, y = poly[..., 0], poly[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def centroid(poly):
    """Area centroid (barycenter) of simple polygons."""
    x, y = poly[..., 0], poly[..., 1]
    xn, yn = np.roll(x, -1, axis=-1), np.roll(y, -1, axis=-1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum(axis=-1)
    cx = ((x + xn) * cr).sum(axis=-1) / (6 * a)
    cy = ((y + yn) * cr).sum(axis=-1) / (6 * a)
    return np.stack((cx, cy), axis=-1)


def diameter(poly):
    d = poly[..., :, None, :] - poly[..., None, :, :]
    return np.sqrt((d**2).sum(axis=-1)).max(axis=(-2, -1))


def edge_lengths(poly):
    return np.linalg.norm(np.roll(poly, -1, axis=-2) - poly, axis=-1)


def cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
