"""Scikit-learn style front end: ``VEMPoisson().fit(mesh, source, boundary).predict(points)``."""

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .element import as_diffusion
from .mesh import PolyMesh, read_mesh, validate
from .post import (
    discrete_linf,
    discrete_w1inf,
    eval_projection,
    l2_h1_errors,
    local_dofs,
    vertex_gradients,
)
from .system import apply_dirichlet, assemble, build_dofmap, element_batches, interpolate, solve

__all__ = ["VEMPoisson", "check_mesh", "check_degree", "check_diffusion", "check_points", "locate"]


def check_mesh(mesh, structural=False):
    """Accept a PolyMesh, a ``(vertices, cells)`` pair or a mesh file path."""
    if isinstance(mesh, PolyMesh):
        out = mesh
    elif isinstance(mesh, (str, bytes)) or hasattr(mesh, "__fspath__"):
        return read_mesh(mesh)
    else:
        try:
            verts, cells = mesh
        except (TypeError, ValueError):
            raise TypeError("mesh must be a PolyMesh, a (vertices, cells) pair or a path")
        out = PolyMesh(np.asarray(verts, dtype=float), tuple(cells))
    if structural:
        validate(out)
    return out


def check_degree(k, max_degree=None):
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(f"degree must be a positive integer, got {k!r}")
    if max_degree is not None and k > max_degree:
        raise ValueError(f"degree must be <= {max_degree}, got {k}")
    return int(k)


def check_diffusion(alpha):
    return as_diffusion(alpha)


def check_points(X):
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"points must have two columns, got {X.shape[1]}")
    return X


def _inside(poly, p, tol):
    """Points ``p`` (n, 2) inside or on the boundary of padded polygons ``poly`` (n, m, 2)."""
    a = poly
    b = np.roll(poly, -1, axis=1)
    px, py = p[:, None, 0], p[:, None, 1]
    cond = (a[..., 1] > py) != (b[..., 1] > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[..., 0] + (py - a[..., 1]) * (b[..., 0] - a[..., 0]) / (b[..., 1] - a[..., 1])
    crossing = np.sum(cond & (px < xint), axis=1) % 2 == 1
    e = b - a
    d = p[:, None, :] - a
    el2 = np.einsum("nmd,nmd->nm", e, e)
    t = np.clip(np.einsum("nmd,nmd->nm", d, e) / np.where(el2 > 0, el2, 1.0), 0.0, 1.0)
    dist = np.linalg.norm(d - t[..., None] * e, axis=-1)
    return crossing | np.any(dist <= tol, axis=1)


def locate(mesh, points, n_candidates=12):
    """Index of a cell containing each point (-1 when outside every candidate)."""
    points = np.asarray(points, dtype=float)
    centers = np.array([mesh.cell_coords(c).mean(axis=0) for c in range(mesh.n_cells)])
    m = max(len(c) for c in mesh.cells)
    padded = np.empty((mesh.n_cells, m, 2))
    for c, loop in enumerate(mesh.cells):
        padded[c, : len(loop)] = mesh.vertices[loop]
        padded[c, len(loop):] = mesh.vertices[loop[-1]]
    nc = min(n_candidates, mesh.n_cells)
    _, cand = cKDTree(centers).query(points, k=nc)
    cand = np.asarray(cand).reshape(len(points), nc)
    out = -np.ones(len(points), dtype=np.int64)
    tol = 1e-12 * mesh.h
    for j in range(nc):
        todo = np.nonzero(out < 0)[0]
        if len(todo) == 0:
            break
        c = cand[todo, j]
        hit = _inside(padded[c], points[todo], tol)
        out[todo[hit]] = c[hit]
    return out


class VEMPoisson(BaseEstimator):
    """Conforming virtual element solver for ``-div(alpha grad u) = f`` with Dirichlet data.

    Parameters
    ----------
    degree : int
        Polynomial degree k >= 1 of the local spaces.
    diffusion : float or (2, 2) array, optional
        Constant symmetric positive definite coefficient; identity by default.
    solver : {"cg", "direct"}
        Jacobi-preconditioned CG or a sparse direct factorisation.
    tol : float
        Relative residual tolerance for CG.
    max_iter : int, optional
        CG iteration cap; defaults to 20 times the number of unknowns.

    Attributes set by ``fit``: ``mesh_``, ``dofmap_``, ``operators_``,
    ``dofs_`` (full dof vector) and ``solve_info_``.
    """

    def __init__(self, degree=1, diffusion=None, solver="cg", tol=1e-12, max_iter=None):
        self.degree = degree
        self.diffusion = diffusion
        self.solver = solver
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, mesh, source=None, boundary=None):
        """Assemble and solve on ``mesh``.

        ``source`` and ``boundary`` are callables on points ``(..., 2)``;
        ``None`` means zero load and homogeneous Dirichlet data.
        """
        k = check_degree(self.degree)
        alpha = check_diffusion(self.diffusion)
        if self.solver not in ("cg", "direct"):
            raise ValueError(f"solver must be 'cg' or 'direct', got {self.solver!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        mesh = check_mesh(mesh)
        dofmap = build_dofmap(mesh, k)
        ops = list(element_batches(mesh, k, alpha))
        system = assemble(mesh, dofmap, k, alpha, source, operators=ops)
        reduced = apply_dirichlet(system, dofmap, boundary)
        dofs, info = solve(reduced, method=self.solver, tol=self.tol, maxiter=self.max_iter)
        self.mesh_ = mesh
        self.dofmap_ = dofmap
        self.operators_ = ops
        self.system_ = reduced
        self.dofs_ = dofs
        self.solve_info_ = info
        self.n_iter_ = info.iterations
        return self

    def _evaluate(self, X, which):
        check_is_fitted(self, "dofs_")
        X = check_points(X)
        cells = locate(self.mesh_, X)
        if np.any(cells < 0):
            raise ValueError("some points lie outside the mesh")
        shape = (len(X), 2) if which == "grad_projection" else (len(X),)
        out = np.empty(shape)
        for batch_cells, ops in self.operators_:
            sel = np.nonzero(np.isin(cells, batch_cells))[0]
            if len(sel) == 0:
                continue
            j = np.searchsorted(batch_cells, cells[sel])
            nv = ops.verts.shape[1]
            ld = local_dofs(self.mesh_, self.dofmap_, batch_cells[j], nv, self.dofs_)
            out[sel] = eval_projection(ops[j], ld, X[sel][:, None, :], which)[:, 0]
        return out

    def predict(self, X):
        """Energy projection of the discrete solution at points ``X`` (n, 2)."""
        return self._evaluate(X, "projection")

    def predict_gradient(self, X):
        return self._evaluate(X, "grad_projection")

    def vertex_values(self):
        check_is_fitted(self, "dofs_")
        return self.dofs_[: self.mesh_.n_vertices].copy()

    def vertex_gradients(self):
        """Averaged projected gradients at the mesh vertices."""
        check_is_fitted(self, "dofs_")
        return vertex_gradients(self.mesh_, self.dofmap_, self.operators_, self.dofs_)

    def interpolant(self, w):
        """Dof vector of the virtual element interpolant of ``w`` on the fitted mesh."""
        check_is_fitted(self, "dofs_")
        return interpolate(self.mesh_, self.dofmap_, w, operators=self.operators_)

    def errors(self, u, grad_u):
        """Discrete L-inf and W1-inf vertex errors plus L2/H1 projection errors."""
        check_is_fitted(self, "dofs_")
        args = (self.mesh_, self.dofmap_, self.operators_, self.dofs_)
        e_l2, e_h1 = l2_h1_errors(*args, u, grad_u)
        return {
            "linf": discrete_linf(self.mesh_, self.dofs_, u),
            "w1inf": discrete_w1inf(*args, grad_u),
            "l2": e_l2,
            "h1": e_h1,
        }
