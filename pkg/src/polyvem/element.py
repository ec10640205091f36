"""Local virtual element operators.

Everything here is batched: a stack of cells with a common vertex count,
shape ``(n_cells, n_vertices, 2)``, is processed at once and every returned
matrix carries that leading batch axis.  The single-cell functions at the
bottom wrap the batched kernels.

Local degrees of freedom are ordered as: vertex values (CCW), then the k-1
interior Gauss-Lobatto node values of each local edge (edge i runs from
vertex i to vertex i+1), then the k(k-1)/2 scaled cell moments
``(1/|E|) int_E v m`` for the scaled monomials m of degree <= k-2.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .geometry import centroid, diameter, edge_lengths, signed_area
from .quadrature import batch_polygon_rule, gauss_lobatto

__all__ = [
    "exponents",
    "n_poly",
    "n_local_dofs",
    "MonomialBasis",
    "ElementOperators",
    "batch_element_operators",
    "batch_local_load",
    "batch_interpolate",
    "batch_dof_nodes",
    "element_operators",
    "build_projector_gradient",
    "build_projector_l2",
    "build_stabilization",
    "build_local_stiffness",
    "build_local_load",
    "interpolate_local",
    "dump_operators",
    "as_diffusion",
]


def n_poly(k):
    """Dimension of the polynomials of degree <= k in 2D (0 for k < 0)."""
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


def n_local_dofs(k, nv):
    return k * nv + k * (k - 1) // 2


@lru_cache(maxsize=None)
def exponents(k):
    """Exponent pairs ordered by total degree, then by decreasing x power."""
    ex = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    a = np.array(ex, dtype=np.int64).reshape(-1, 2)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def _laplace_table(k):
    """Coefficient maps for second derivatives of unit-scaled monomials.

    Returns three ``(n_k, n_{k-2})`` matrices so that, for a symmetric
    coefficient A and cell size h, ``div(A grad m_a) = sum_b L[a, b] m_b / h**2``
    with ``L = A11 * Lxx + 2 A12 * Lxy + A22 * Lyy``.
    """
    ex = exponents(k)
    index = {tuple(e): i for i, e in enumerate(exponents(max(k - 2, 0)))}
    nl = n_poly(k - 2)
    lxx, lxy, lyy = (np.zeros((len(ex), nl)) for _ in range(3))
    for i, (a, b) in enumerate(ex):
        if a >= 2:
            lxx[i, index[(a - 2, b)]] = a * (a - 1)
        if a >= 1 and b >= 1:
            lxy[i, index[(a - 1, b - 1)]] = a * b
        if b >= 2:
            lyy[i, index[(a, b - 2)]] = b * (b - 1)
    return lxx, lxy, lyy


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomials ((x - center) / h)^s, |s| <= k, for a batch of cells."""

    k: int
    center: np.ndarray
    h: np.ndarray

    @property
    def exponents(self):
        return exponents(self.k)

    @property
    def size(self):
        return n_poly(self.k)

    def _xi(self, pts):
        pts = np.asarray(pts, dtype=float)
        extra = pts.ndim - self.center.ndim
        shape = self.center.shape[:-1] + (1,) * extra + (2,)
        return (pts - self.center.reshape(shape)) / self.h.reshape(shape[:-1] + (1,))

    def values(self, pts):
        """``(..., n_k)`` monomial values at points ``(batch, ..., 2)``."""
        xi = self._xi(pts)
        ex = self.exponents
        return xi[..., 0:1] ** ex[:, 0] * xi[..., 1:2] ** ex[:, 1]

    def gradients(self, pts):
        """``(..., n_k, 2)`` monomial gradients."""
        xi = self._xi(pts)
        ex = self.exponents
        a, b = ex[:, 0], ex[:, 1]
        x, y = xi[..., 0:1], xi[..., 1:2]
        gx = a * x ** np.maximum(a - 1, 0) * y**b
        gy = b * x**a * y ** np.maximum(b - 1, 0)
        extra = xi.ndim - 1 - (self.h.ndim)
        hs = self.h.reshape(self.h.shape + (1,) * (extra + 1))
        return np.stack((gx / hs, gy / hs), axis=-1)


@dataclass(frozen=True)
class ElementOperators:
    """Batched local VEM matrices; every field has a leading cell axis.

    ``pi_grad`` holds the monomial coordinates of the energy projection of
    each local basis function, ``pi0`` and ``pi0_km1`` those of the L2
    projections onto degree k and k-1.  ``quad_points``/``quad_weights`` is
    the degree 2k+2 cell rule reused for loads, interpolation and errors.
    """

    k: int
    verts: np.ndarray
    area: np.ndarray
    basis: MonomialBasis
    D: np.ndarray
    B: np.ndarray
    G: np.ndarray
    pi_grad: np.ndarray
    pi_dof: np.ndarray
    H: np.ndarray
    C: np.ndarray
    pi0: np.ndarray
    pi0_km1: np.ndarray
    S: np.ndarray
    K: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray

    @property
    def n_cells(self):
        return self.D.shape[0]

    def __getitem__(self, idx):
        """Operators of a sub-batch (a slice or index array)."""
        if isinstance(idx, (int, np.integer)):
            idx = slice(idx, idx + 1)
        basis = MonomialBasis(self.k, self.basis.center[idx], self.basis.h[idx])
        fields = {f: getattr(self, f)[idx] for f in (
            "verts", "area", "D", "B", "G", "pi_grad", "pi_dof", "H", "C", "pi0",
            "pi0_km1", "S", "K", "quad_points", "quad_weights")}
        return ElementOperators(k=self.k, basis=basis, **fields)


def as_diffusion(alpha):
    if alpha is None:
        return np.eye(2)
    a = np.asarray(alpha, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(2)
    if a.shape != (2, 2):
        raise ValueError("diffusion coefficient must be a scalar or a 2x2 matrix")
    if not np.allclose(a, a.T) or np.linalg.eigvalsh(a).min() <= 0:
        raise ValueError("diffusion coefficient must be symmetric positive definite")
    return a


def batch_dof_nodes(verts, k):
    """Coordinates of vertex and edge-interior nodes, ``(n_cells, k * n_vertices, 2)``."""
    verts = np.asarray(verts, dtype=float)
    t = gauss_lobatto(k + 1).nodes[1:-1]
    evec = np.roll(verts, -1, axis=1) - verts
    inner = verts[:, :, None, :] + t[None, None, :, None] * evec[:, :, None, :]
    ne, nv, _ = verts.shape
    return np.concatenate((verts, inner.reshape(ne, nv * (k - 1), 2)), axis=1)


def _geometry(verts, k):
    area = signed_area(verts)
    basis = MonomialBasis(k, centroid(verts), diameter(verts))
    pts, w = batch_polygon_rule(verts, 2 * k + 2)
    return area, basis, pts, w


def _matrix_B(verts, k, alpha, area, basis):
    ne, nv, _ = verts.shape
    nk = n_poly(k)
    ndof = n_local_dofs(k, nv)
    rule = gauss_lobatto(k + 1)
    t, w = rule.nodes, rule.weights
    evec = np.roll(verts, -1, axis=1) - verts
    # outward normal scaled by the edge length
    nl = np.stack((evec[..., 1], -evec[..., 0]), axis=-1)
    X = verts[:, :, None, :] + t[None, None, :, None] * evec[:, :, None, :]
    grad = basis.gradients(X)  # (ne, nv, k+1, nk, 2)
    flux = np.einsum("evjad,dc,evc->evja", grad, alpha, nl) * w[None, None, :, None]

    B = np.zeros((ne, nk, ndof))
    vert = flux[:, :, 0, :] + np.roll(flux[:, :, k, :], 1, axis=1)
    B[:, :, :nv] = vert.transpose(0, 2, 1)
    if k > 1:
        inner = flux[:, :, 1:k, :].reshape(ne, nv * (k - 1), nk)
        B[:, :, nv:k * nv] = inner.transpose(0, 2, 1)
        lxx, lxy, lyy = _laplace_table(k)
        L = alpha[0, 0] * lxx + 2 * alpha[0, 1] * lxy + alpha[1, 1] * lyy
        nint = n_poly(k - 2)
        scale = (area / basis.h**2)[:, None, None]
        B[:, :, k * nv:k * nv + nint] -= scale * L[None]

    B[:, 0, :] = 0.0
    if k == 1:
        lengths = edge_lengths(verts)
        per = lengths.sum(axis=1)
        B[:, 0, :nv] = 0.5 * (lengths + np.roll(lengths, 1, axis=1)) / per[:, None]
    else:
        B[:, 0, k * nv] = 1.0
    return B


def _matrix_D(verts, k, basis, H, area):
    nodes = batch_dof_nodes(verts, k)
    Dn = basis.values(nodes)
    nint = n_poly(k - 2)
    Dm = H[:, :nint, :] / area[:, None, None]
    return np.concatenate((Dn, Dm), axis=1)


def batch_element_operators(verts, k, alpha=None):
    """Build every local matrix for a stack of cells with equal vertex counts."""
    if k < 1:
        raise ValueError("polynomial degree must be >= 1")
    verts = np.asarray(verts, dtype=float)
    alpha = as_diffusion(alpha)
    ne, nv, _ = verts.shape
    nk = n_poly(k)
    ndof = n_local_dofs(k, nv)
    area, basis, qp, qw = _geometry(verts, k)

    mq = basis.values(qp)
    H = np.einsum("eq,eqa,eqb->eab", qw, mq, mq)
    D = _matrix_D(verts, k, basis, H, area)
    B = _matrix_B(verts, k, alpha, area, basis)
    G = B @ D
    pi_grad = np.linalg.solve(G, B)
    pi_dof = D @ pi_grad

    nint = n_poly(k - 2)
    C = np.zeros((ne, nk, ndof))
    C[:, np.arange(nint), k * nv + np.arange(nint)] = area[:, None]
    C[:, nint:, :] = (H @ pi_grad)[:, nint:, :]
    pi0 = np.linalg.solve(H, C)
    nl = n_poly(k - 1)
    pi0_km1 = np.linalg.solve(H[:, :nl, :nl], C[:, :nl, :])

    S = _stabilization(pi_dof)
    Galpha = G.copy()
    Galpha[:, 0, :] = 0.0
    K = np.swapaxes(pi_grad, 1, 2) @ Galpha @ pi_grad + S
    K = 0.5 * (K + np.swapaxes(K, 1, 2))
    return ElementOperators(k, verts, area, basis, D, B, G, pi_grad, pi_dof, H, C,
                            pi0, pi0_km1, S, K, qp, qw)


def _stabilization(pi_dof):
    r = np.eye(pi_dof.shape[-1]) - pi_dof
    return np.swapaxes(r, -1, -2) @ r


def batch_local_load(ops, f):
    """Right-hand side ``(f, Pi0_{k-1} phi_i)`` for every cell of a batch."""
    fq = f(ops.quad_points)
    nl = n_poly(ops.k - 1)
    mq = ops.basis.values(ops.quad_points)[..., :nl]
    F = np.einsum("eq,eq,eqa->ea", ops.quad_weights, fq, mq)
    return np.einsum("eai,ea->ei", ops.pi0_km1, F)


def batch_interpolate(ops, w):
    """Local dof values of a function ``w(points) -> values``."""
    k = ops.k
    nodes = batch_dof_nodes(ops.verts, k)
    vals = w(nodes)
    nint = n_poly(k - 2)
    if nint == 0:
        return vals
    mq = ops.basis.values(ops.quad_points)[..., :nint]
    mom = np.einsum("eq,eq,eqa->ea", ops.quad_weights, w(ops.quad_points), mq)
    return np.concatenate((vals, mom / ops.area[:, None]), axis=1)


def _one(cell):
    cell = np.asarray(cell, dtype=float)
    if cell.ndim != 2 or cell.shape[1] != 2:
        raise ValueError("cell must be an (n, 2) vertex array")
    return cell[None]


def element_operators(cell, k, alpha=None):
    """All local matrices of a single cell (batch of one)."""
    return batch_element_operators(_one(cell), k, alpha)


def build_projector_gradient(cell, k, alpha=None):
    """Return ``D, B, G, pi_grad`` for one cell."""
    verts = _one(cell)
    alpha = as_diffusion(alpha)
    area, basis, qp, qw = _geometry(verts, k)
    mq = basis.values(qp)
    H = np.einsum("eq,eqa,eqb->eab", qw, mq, mq)
    D = _matrix_D(verts, k, basis, H, area)
    B = _matrix_B(verts, k, alpha, area, basis)
    G = B @ D
    if np.linalg.cond(G[0]) > 1e14:
        raise np.linalg.LinAlgError("singular G matrix: degenerate cell geometry")
    return D[0], B[0], G[0], np.linalg.solve(G, B)[0]


def build_projector_l2(cell, k, D, pi_grad):
    """Return ``H, C, pi0, pi0_km1`` for one cell given its energy projector."""
    verts = _one(cell)
    area, basis, qp, qw = _geometry(verts, k)
    mq = basis.values(qp)[0]
    H = np.einsum("q,qa,qb->ab", qw[0], mq, mq)
    nv = verts.shape[1]
    nint = n_poly(k - 2)
    C = np.zeros((n_poly(k), n_local_dofs(k, nv)))
    C[np.arange(nint), k * nv + np.arange(nint)] = area[0]
    C[nint:] = (H @ pi_grad)[nint:]
    nl = n_poly(k - 1)
    return H, C, np.linalg.solve(H, C), np.linalg.solve(H[:nl, :nl], C[:nl])


def build_stabilization(D, pi_dof):
    """Dof-dof stabilization ``(I - Pi)^T (I - Pi)``; ``D`` only fixes the size check."""
    if pi_dof.shape[0] != D.shape[0]:
        raise ValueError("projector and D disagree on the number of dofs")
    return _stabilization(pi_dof)


def build_local_stiffness(ops, alpha=None):
    """Recompute ``K`` of a single-cell batch for a (possibly different) coefficient."""
    alpha = as_diffusion(alpha)
    if ops.n_cells != 1:
        raise ValueError("expected single-cell operators")
    return batch_element_operators(ops.verts, ops.k, alpha).K[0]


def build_local_load(cell, k, f, pi0_km1=None):
    ops = element_operators(cell, k)
    if pi0_km1 is not None:
        ops = replace(ops, pi0_km1=np.asarray(pi0_km1, dtype=float)[None])
    return batch_local_load(ops, f)[0]


def interpolate_local(cell, k, w):
    return batch_interpolate(element_operators(cell, k), w)[0]


def dump_operators(ops, path, cell=0):
    """Write D, B, G, H, C, S, K of one cell as row-major text matrices."""
    with open(path, "w") as fh:
        for name in ("D", "B", "G", "H", "C", "S", "K"):
            m = getattr(ops, name)[cell]
            fh.write(f"{name} {m.shape[0]} {m.shape[1]}\n")
            for row in m:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
