"""Manufactured test problems on the unit square.

All callables take points of shape ``(..., 2)``.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["CaseDefinition", "sinsin", "gaussian", "polynomial", "registered_cases", "get_case"]


@dataclass(frozen=True)
class CaseDefinition:
    name: str
    u: Callable
    grad_u: Callable
    f: Callable
    g: Callable
    alpha: np.ndarray = None
    homogeneous: bool = False


def sinsin():
    """u = sin(pi x) sin(pi y), homogeneous Dirichlet data."""
    pi = np.pi

    def u(p):
        return np.sin(pi * p[..., 0]) * np.sin(pi * p[..., 1])

    def grad_u(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack((pi * np.cos(pi * x) * np.sin(pi * y),
                         pi * np.sin(pi * x) * np.cos(pi * y)), axis=-1)

    def f(p):
        return 2 * pi**2 * u(p)

    def g(p):
        return np.zeros(np.shape(p)[:-1])

    return CaseDefinition("sinsin", u, grad_u, f, g, np.eye(2), homogeneous=True)


def gaussian(ell=25.0):
    """u = exp(-ell |x - (1/2, 1/2)|^2) with its boundary trace as Dirichlet data."""
    if not ell > 0:
        raise ValueError("gaussian width parameter must be positive")

    def u(p):
        r2 = (p[..., 0] - 0.5) ** 2 + (p[..., 1] - 0.5) ** 2
        return np.exp(-ell * r2)

    def grad_u(p):
        return -2 * ell * (p - 0.5) * u(p)[..., None]

    def f(p):
        r2 = (p[..., 0] - 0.5) ** 2 + (p[..., 1] - 0.5) ** 2
        return 4 * ell * (1 - ell * r2) * u(p)

    return CaseDefinition("gaussian", u, grad_u, f, u, np.eye(2))


def polynomial(coef, alpha=None):
    """Polynomial exact solution ``sum c[a, b] x^a y^b`` with matching load for ``-div(alpha grad u)``.

    ``coef`` is a square array indexed by the x and y powers.
    """
    c = np.asarray(coef, dtype=float)
    A = np.eye(2) if alpha is None else np.asarray(alpha, dtype=float)
    pv = np.polynomial.polynomial
    cx = pv.polyder(c, axis=0)
    cy = pv.polyder(c, axis=1)
    cxx = pv.polyder(c, 2, axis=0)
    cyy = pv.polyder(c, 2, axis=1)
    cxy = pv.polyder(cx, axis=1)

    def ev(cc, p):
        return pv.polyval2d(p[..., 0], p[..., 1], cc) if cc.size else np.zeros(p.shape[:-1])

    def u(p):
        return ev(c, p)

    def grad_u(p):
        return np.stack((ev(cx, p), ev(cy, p)), axis=-1)

    def f(p):
        return -(A[0, 0] * ev(cxx, p) + 2 * A[0, 1] * ev(cxy, p) + A[1, 1] * ev(cyy, p))

    return CaseDefinition("polynomial", u, grad_u, f, u, A)


_REGISTRY = {"sinsin": sinsin, "gaussian": gaussian}


def registered_cases():
    return dict(_REGISTRY)


def get_case(name, ell=25.0):
    if name not in _REGISTRY:
        raise ValueError(f"unknown case {name!r}; expected one of {sorted(_REGISTRY)}")
    return gaussian(ell) if name == "gaussian" else _REGISTRY[name]()
