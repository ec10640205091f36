"""Global dof numbering, sparse assembly, Dirichlet elimination and solvers."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import batch_element_operators, batch_interpolate, batch_local_load, n_poly
from .quadrature import gauss_lobatto

__all__ = [
    "DofMap",
    "LinearSystem",
    "ReducedSystem",
    "SolverError",
    "SolveInfo",
    "build_dofmap",
    "element_batches",
    "assemble",
    "apply_dirichlet",
    "solve",
    "pcg",
    "interpolate",
    "write_system",
]

log = logging.getLogger(__name__)

CHUNK = 1024


class SolverError(RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class DofMap:
    """Numbering: vertices, then (k-1) dofs per edge along its canonical
    orientation, then k(k-1)/2 moment dofs per cell."""

    mesh: object
    k: int

    @property
    def n_vertex_dofs(self):
        return self.mesh.n_vertices

    @property
    def n_edge_dofs(self):
        return (self.k - 1) * self.mesh.n_edges

    @property
    def n_cell_dofs(self):
        return n_poly(self.k - 2) * self.mesh.n_cells

    @property
    def n_dof(self):
        return self.n_vertex_dofs + self.n_edge_dofs + self.n_cell_dofs

    @cached_property
    def cell_dofs(self):
        """Local-to-global maps keyed by vertex count, aligned with ``mesh.groups``."""
        mesh, k = self.mesh, self.k
        nint = n_poly(k - 2)
        out = {}
        for nv, idx in mesh.groups.items():
            conn, _ = mesh.group_coords(nv)
            cols = [conn]
            if k > 1:
                eid = np.array([mesh.cell_edges[c] for c in idx]).reshape(len(idx), nv)
                fwd = np.array([mesh.cell_edge_forward[c] for c in idx]).reshape(len(idx), nv)
                j = np.arange(k - 1)
                local = np.where(fwd[..., None], j, k - 2 - j)
                edofs = self.n_vertex_dofs + eid[..., None] * (k - 1) + local
                cols.append(edofs.reshape(len(idx), nv * (k - 1)))
            if nint:
                base = self.n_vertex_dofs + self.n_edge_dofs
                cols.append(base + idx[:, None] * nint + np.arange(nint))
            out[nv] = np.concatenate(cols, axis=1)
        return out

    @cached_property
    def boundary(self):
        mask = np.zeros(self.n_dof, dtype=bool)
        mask[: self.n_vertex_dofs] = self.mesh.boundary_vertices
        if self.k > 1:
            be = np.nonzero(self.mesh.boundary_edges)[0]
            ids = self.n_vertex_dofs + be[:, None] * (self.k - 1) + np.arange(self.k - 1)
            mask[ids.ravel()] = True
        return mask

    @cached_property
    def node_coords(self):
        """Coordinates of all vertex and edge dofs, in global order."""
        mesh = self.mesh
        pts = [mesh.vertices]
        if self.k > 1:
            t = gauss_lobatto(self.k + 1).nodes[1:-1]
            lo = mesh.vertices[mesh.edges[:, 0]]
            hi = mesh.vertices[mesh.edges[:, 1]]
            pts.append((lo[:, None, :] + t[None, :, None] * (hi - lo)[:, None, :]).reshape(-1, 2))
        return np.concatenate(pts)


def build_dofmap(mesh, k):
    if k < 1:
        raise ValueError("polynomial degree must be >= 1")
    return DofMap(mesh, k)


def _threads():
    try:
        return max(1, int(os.environ.get("POLYVEM_THREADS", "1")))
    except ValueError:
        return 1


def element_batches(mesh, k, alpha=None):
    """Yield ``(cell_indices, ElementOperators)`` in deterministic order.

    Cells are grouped by vertex count and cut into fixed-size chunks; the
    chunking does not depend on the thread count, so results are identical
    for any level of parallelism.
    """
    jobs = []
    for nv, idx in mesh.groups.items():
        conn, pts = mesh.group_coords(nv)
        for s in range(0, len(idx), CHUNK):
            jobs.append((idx[s:s + CHUNK], pts[s:s + CHUNK]))
    n = _threads()
    if n == 1:
        for cells, pts in jobs:
            yield cells, batch_element_operators(pts, k, alpha)
        return
    with ThreadPoolExecutor(n) as pool:
        results = pool.map(lambda job: batch_element_operators(job[1], k, alpha), jobs)
        for (cells, _), ops in zip(jobs, results):
            yield cells, ops


@dataclass(frozen=True)
class LinearSystem:
    """Fully assembled symmetric matrix and load over all dofs."""

    A: sp.csr_array
    b: np.ndarray


@dataclass(frozen=True)
class ReducedSystem:
    """Interior block after symmetric elimination of the Dirichlet dofs."""

    A: sp.csr_array
    b: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    boundary_values: np.ndarray
    n_dof: int


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual: float
    method: str


def assemble(mesh, dofmap, k, alpha, f, operators=None):
    """Scatter local stiffness matrices and loads into a global CSR system.

    ``operators`` may carry precomputed ``element_batches`` output (a list),
    so post-processing can reuse the local matrices.
    """
    if dofmap.k != k:
        raise ValueError("dof map built for a different degree")
    rows, cols, vals = [], [], []
    b = np.zeros(dofmap.n_dof)
    batches = operators if operators is not None else element_batches(mesh, k, alpha)
    for cells, ops in batches:
        nv = ops.verts.shape[1]
        pos = np.searchsorted(mesh.groups[nv], cells)
        g = dofmap.cell_dofs[nv][pos]
        nd = g.shape[1]
        rows.append(np.repeat(g, nd, axis=1).ravel())
        cols.append(np.tile(g, (1, nd)).ravel())
        vals.append(ops.K.ravel())
        if f is not None:
            np.add.at(b, g.ravel(), batch_local_load(ops, f).ravel())
    n = dofmap.n_dof
    if rows:
        A = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()
    else:
        A = sp.csr_array((n, n))
    A.sum_duplicates()
    return LinearSystem(A, b)


def apply_dirichlet(system, dofmap, g=None):
    """Fix boundary vertex/edge dofs to point values of ``g`` and eliminate them.

    ``g`` maps points ``(..., 2)`` to values; ``None`` means homogeneous data.
    """
    bmask = dofmap.boundary
    bnd = np.nonzero(bmask)[0]
    inner = np.nonzero(~bmask)[0]
    gb = np.zeros(len(bnd))
    if g is not None and len(bnd):
        gb = np.asarray(g(dofmap.node_coords[bnd]), dtype=float)
    A = system.A
    A_ii = A[inner][:, inner].tocsr()
    b = system.b[inner] - A[inner][:, bnd] @ gb
    return ReducedSystem(A_ii, b, inner, bnd, gb, dofmap.n_dof)


def pcg(A, b, tol=1e-12, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients on a symmetric positive definite matrix.

    Stops when ``||b - A x|| <= tol * ||b||``.  Returns ``(x, iterations, rel_residual)``
    and raises SolverError when the iteration budget runs out.
    """
    n = len(b)
    if maxiter is None:
        maxiter = 20 * max(n, 1)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol:
        if it >= maxiter:
            raise SolverError(f"CG did not converge in {maxiter} iterations "
                              f"(relative residual {res:.3e})", res, it)
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError("CG breakdown: matrix is not positive definite", res, it)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        res = np.linalg.norm(r) / bnorm
    # guard against drift of the recursive residual
    true_res = np.linalg.norm(b - A @ x) / bnorm
    return x, it, max(res, true_res)


def solve(reduced, method="cg", tol=1e-12, maxiter=None):
    """Solve the reduced system and return ``(full dof vector, SolveInfo)``."""
    x = np.zeros(reduced.n_dof)
    x[reduced.boundary] = reduced.boundary_values
    n = len(reduced.b)
    if n == 0:
        return x, SolveInfo(0, 0.0, method)
    if method == "cg":
        xi, it, res = pcg(reduced.A, reduced.b, tol=tol, maxiter=maxiter)
    elif method == "direct":
        xi = spla.spsolve(reduced.A.tocsc(), reduced.b)
        bn = np.linalg.norm(reduced.b)
        res = np.linalg.norm(reduced.b - reduced.A @ xi) / bn if bn else 0.0
        it = 0
    else:
        raise ValueError(f"unknown solver method {method!r}")
    log.debug("%s solve: n=%d iterations=%d residual=%.3e", method, n, it, res)
    x[reduced.interior] = xi
    return x, SolveInfo(it, float(res), method)


def interpolate(mesh, dofmap, w, operators=None):
    """Global interpolant of ``w``: point values at nodes, quadrature moments in cells."""
    k = dofmap.k
    out = np.empty(dofmap.n_dof)
    nn = dofmap.n_vertex_dofs + dofmap.n_edge_dofs
    out[:nn] = w(dofmap.node_coords)
    if n_poly(k - 2) == 0:
        return out
    batches = operators if operators is not None else element_batches(mesh, k)
    for cells, ops in batches:
        nv = ops.verts.shape[1]
        pos = np.searchsorted(mesh.groups[nv], cells)
        g = dofmap.cell_dofs[nv][pos]
        loc = batch_interpolate(ops, w)
        out[g[:, k * nv:]] = loc[:, k * nv:]
    return out


def write_system(system, matrix_path, rhs_path):
    """Dump the matrix in Matrix Market coordinate format and the load as text."""
    scipy.io.mmwrite(matrix_path, sp.coo_matrix(system.A), symmetry="general")
    np.savetxt(rhs_path, system.b, fmt="%.17g")
