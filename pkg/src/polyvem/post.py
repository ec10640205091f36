"""Evaluation of element projections, error norms and observed convergence orders."""

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ErrorRecord",
    "local_dofs",
    "eval_projection",
    "vertex_gradients",
    "discrete_linf",
    "discrete_w1inf",
    "l2_h1_errors",
    "convergence_orders",
    "CSV_COLUMNS",
    "records_to_csv",
    "records_to_markdown",
]

CSV_COLUMNS = ("family", "k", "level", "N", "h", "e_linf", "order_linf", "e_w1inf",
               "order_w1inf", "e_l2", "order_l2", "e_h1", "order_h1")


@dataclass(frozen=True)
class ErrorRecord:
    family: str
    k: int
    level: int
    N: int
    h: float
    e_linf: float
    e_w1inf: float
    e_l2: float
    e_h1: float
    order_linf: float = None
    order_w1inf: float = None
    order_l2: float = None
    order_h1: float = None


def local_dofs(mesh, dofmap, cells, nv, x):
    """Gather local dof vectors ``(n_cells, N_E)`` of a batch from the global vector."""
    pos = np.searchsorted(mesh.groups[nv], cells)
    return x[dofmap.cell_dofs[nv][pos]]


def eval_projection(ops, dofs, points, which="grad_projection"):
    """Evaluate a projection of the discrete function on each cell of a batch.

    ``dofs`` is ``(n_cells, N_E)`` and ``points`` ``(n_cells, n_points, 2)``.
    ``which`` is ``"projection"`` (energy projection, values),
    ``"grad_projection"`` (its gradient) or ``"l2_projection"`` (values).
    """
    dofs = np.asarray(dofs, dtype=float)
    points = np.asarray(points, dtype=float)
    if which == "l2_projection":
        coef = np.einsum("eai,ei->ea", ops.pi0, dofs)
    else:
        coef = np.einsum("eai,ei->ea", ops.pi_grad, dofs)
    if which == "grad_projection":
        return np.einsum("eqad,ea->eqd", ops.basis.gradients(points), coef)
    if which in ("projection", "l2_projection"):
        return np.einsum("eqa,ea->eq", ops.basis.values(points), coef)
    raise ValueError(f"unknown projection {which!r}")


def vertex_gradients(mesh, dofmap, operators, x):
    """Equal-weight average over incident cells of the projected gradient at each vertex."""
    acc = np.zeros((mesh.n_vertices, 2))
    count = np.zeros(mesh.n_vertices)
    for cells, ops in operators:
        nv = ops.verts.shape[1]
        ld = local_dofs(mesh, dofmap, cells, nv, x)
        g = eval_projection(ops, ld, ops.verts, "grad_projection")
        conn = dofmap.cell_dofs[nv][np.searchsorted(mesh.groups[nv], cells)][:, :nv]
        np.add.at(acc, conn.ravel(), g.reshape(-1, 2))
        np.add.at(count, conn.ravel(), 1.0)
    return acc / count[:, None]


def discrete_linf(mesh, x, u_exact):
    """Max over mesh vertices of |u(p) - u_h(p)| (vertex dofs are point values)."""
    return float(np.abs(u_exact(mesh.vertices) - x[: mesh.n_vertices]).max())


def discrete_w1inf(mesh, dofmap, operators, x, grad_u_exact):
    """Max over vertices of |grad u(p) - averaged projected gradient at p|."""
    g = vertex_gradients(mesh, dofmap, operators, x)
    return float(np.linalg.norm(grad_u_exact(mesh.vertices) - g, axis=1).max())


def l2_h1_errors(mesh, dofmap, operators, x, u_exact, grad_u_exact):
    """``||u - Pi0 u_h||_L2`` and ``|u - Pi_grad u_h|_H1`` by cell quadrature."""
    l2 = np.zeros(mesh.n_cells)
    h1 = np.zeros(mesh.n_cells)
    for cells, ops in operators:
        nv = ops.verts.shape[1]
        ld = local_dofs(mesh, dofmap, cells, nv, x)
        qp, qw = ops.quad_points, ops.quad_weights
        ev = u_exact(qp) - eval_projection(ops, ld, qp, "l2_projection")
        eg = grad_u_exact(qp) - eval_projection(ops, ld, qp, "grad_projection")
        l2[cells] = np.einsum("eq,eq->e", qw, ev**2)
        h1[cells] = np.einsum("eq,eqd->e", qw, eg**2)
    # cell-ordered reduction keeps the sum independent of batching
    return math.sqrt(max(math.fsum(l2), 0.0)), math.sqrt(max(math.fsum(h1), 0.0))


def _order(e0, e1, h0, h1):
    if not (e0 > 0 and e1 > 0 and h0 > 0 and h1 > 0) or h0 == h1:
        return None
    return math.log(e0 / e1) / math.log(h0 / h1)


def convergence_orders(records):
    """Fill observed orders between consecutive records of the same (family, k)."""
    out = []
    prev = {}
    for r in records:
        key = (r.family, r.k)
        p = prev.get(key)
        if p is not None:
            r = replace(r, **{
                f"order_{n}": _order(getattr(p, f"e_{n}"), getattr(r, f"e_{n}"), p.h, r.h)
                for n in ("linf", "w1inf", "l2", "h1")})
        prev[key] = r
        out.append(r)
    return out


def _fmt(name, v):
    if v is None:
        return ""
    if name in ("family",):
        return v
    if name in ("k", "level", "N"):
        return str(v)
    if name.startswith("order"):
        return f"{v:.4f}"
    return f"{v:.10e}"


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(c, getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def records_to_markdown(records, title=None):
    """Table in the layout Degree | N | L-inf error | Order | W1-inf error | Order | ..."""
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines.append("| Family | Degree | N | h | L_inf | Order | W1_inf | Order | L2 | Order | H1 | Order |")
    lines.append("|---|---|---|---|---|---|---|---|---|---|---|---|")

    def o(v):
        return "--" if v is None else f"{v:.2f}"

    for r in records:
        lines.append(
            f"| {r.family} | k={r.k} | {r.N} | {r.h:.3e} | {r.e_linf:.2e} | {o(r.order_linf)} "
            f"| {r.e_w1inf:.2e} | {o(r.order_w1inf)} | {r.e_l2:.2e} | {o(r.order_l2)} "
            f"| {r.e_h1:.2e} | {o(r.order_h1)} |")
    return "\n".join(lines) + "\n"
