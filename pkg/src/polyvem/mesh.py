"""Polygonal meshes of the unit square.

The generators build every vertex on an integer lattice first and only then
scale to floating point, so shared vertices merge exactly.
"""

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .geometry import cross2, diameter, edge_lengths, signed_area

__all__ = [
    "PolyMesh",
    "MeshError",
    "MeshParseError",
    "MeshQualityReport",
    "gen_hexagonal",
    "gen_transformed_hexagonal",
    "gen_nonconvex",
    "generate",
    "FAMILIES",
    "validate",
    "read_mesh",
    "write_mesh",
    "kernel_radius",
]

HEX_BASE = 16
NONCONVEX_BASE = 8


class MeshError(ValueError):
    """Structural violation of the mesh invariants."""


class MeshParseError(MeshError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Conforming polygonal partition of the unit square.

    ``cells`` holds counter-clockwise vertex loops.  Edges are derived and
    stored with canonical orientation (lower vertex index first), sorted
    lexicographically.
    """

    vertices: np.ndarray
    cells: tuple = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        v.flags.writeable = False
        cells = []
        for c in self.cells:
            c = np.array(c, dtype=np.int64)
            if c.ndim != 1 or len(c) < 3:
                raise MeshError("every cell needs at least three vertices")
            if c.min() < 0 or c.max() >= len(v):
                raise MeshError("cell references a missing vertex")
            c.flags.writeable = False
            cells.append(c)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", tuple(cells))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def cell_coords(self, c):
        return self.vertices[self.cells[c]]

    @cached_property
    def groups(self):
        """Cell indices grouped by vertex count, ``{n_vertices: index array}``."""
        sizes = np.array([len(c) for c in self.cells])
        return {int(s): np.nonzero(sizes == s)[0] for s in np.unique(sizes)}

    def group_coords(self, nv):
        idx = self.groups[nv]
        conn = np.array([self.cells[c] for c in idx]).reshape(len(idx), nv)
        return conn, self.vertices[conn]

    @cached_property
    def _edge_data(self):
        nv = self.n_vertices
        a = np.concatenate(self.cells)
        b = np.concatenate([np.roll(c, -1) for c in self.cells])
        owner = np.repeat(np.arange(self.n_cells), [len(c) for c in self.cells])
        if np.any(a == b):
            raise MeshError("cell with a repeated consecutive vertex")
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys, inv, counts = np.unique(lo * nv + hi, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two cells")
        edges = np.column_stack((keys // nv, keys % nv))
        edge_cells = -np.ones((len(keys), 2), dtype=np.int64)
        forward = a < b
        # slot 0: cell traversing the edge low -> high, slot 1: high -> low
        slot = np.where(forward, 0, 1)
        if np.any(np.bincount(inv * 2 + slot, minlength=2 * len(keys)) > 1):
            raise MeshError("adjacent cells traverse a shared edge in the same direction")
        edge_cells[inv, slot] = owner
        offsets = np.concatenate(([0], np.cumsum([len(c) for c in self.cells])))
        cell_edges = tuple(inv[offsets[i]:offsets[i + 1]] for i in range(self.n_cells))
        cell_edge_sign = tuple(forward[offsets[i]:offsets[i + 1]] for i in range(self.n_cells))
        return edges, edge_cells, cell_edges, cell_edge_sign

    @property
    def edges(self):
        return self._edge_data[0]

    @property
    def edge_cells(self):
        """``(n_edges, 2)``; column 0 is the cell running low->high, column 1 the other (-1 if none)."""
        return self._edge_data[1]

    @property
    def cell_edges(self):
        """Per cell, the edge index of local edge i (vertex i -> vertex i+1)."""
        return self._edge_data[2]

    @property
    def cell_edge_forward(self):
        """Per cell, True where local edge i runs along the canonical orientation."""
        return self._edge_data[3]

    @cached_property
    def boundary_edges(self):
        return np.any(self.edge_cells < 0, axis=1)

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    @cached_property
    def vertex_cells(self):
        """Cells incident to each vertex, as a tuple of index arrays."""
        owner = np.repeat(np.arange(self.n_cells), [len(c) for c in self.cells])
        verts = np.concatenate(self.cells)
        order = np.argsort(verts, kind="stable")
        split = np.cumsum(np.bincount(verts, minlength=self.n_vertices))[:-1]
        return tuple(np.split(owner[order], split))

    @cached_property
    def areas(self):
        return np.array([signed_area(self.cell_coords(c)) for c in range(self.n_cells)])

    @cached_property
    def diameters(self):
        out = np.empty(self.n_cells)
        for nv, idx in self.groups.items():
            out[idx] = diameter(self.group_coords(nv)[1])
        return out

    @property
    def h(self):
        return float(self.diameters.max())


def _clip_box(poly, lo, hi):
    """Sutherland-Hodgman clipping of a polygon against an axis-aligned box."""
    for axis in (0, 1):
        for bound, keep in ((lo[axis], lambda p, b=lo[axis], a=axis: p[a] >= b),
                            (hi[axis], lambda p, b=hi[axis], a=axis: p[a] <= b)):
            out = []
            n = len(poly)
            for i in range(n):
                cur, prev = poly[i], poly[i - 1]
                cin, pin = keep(cur), keep(prev)
                if cin != pin:
                    t = (bound - prev[axis]) / (cur[axis] - prev[axis])
                    out.append(prev + t * (cur - prev))
                if cin:
                    out.append(cur)
            poly = np.array(out)
            if len(poly) == 0:
                return poly
    return poly


def _lattice_mesh(cells, scale):
    """Merge integer lattice loops into a PolyMesh with coordinates ``lattice * scale``."""
    pts = np.concatenate(cells)
    keys, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.ravel()
    offsets = np.cumsum([0] + [len(c) for c in cells])
    loops = [inv[offsets[i]:offsets[i + 1]] for i in range(len(cells))]
    return PolyMesh(keys * np.asarray(scale, dtype=float), tuple(loops))


def gen_hexagonal(level):
    """Structured flat-top hexagonal tiling of the unit square, clipped at the boundary.

    Level ``l`` has ``16 * 2**l`` hexagon columns and rows.  Hexagon centres of
    even columns sit on the horizontal grid lines and columns are centred on
    x = j/m, so clipping always cuts through vertices or centres and never
    produces slivers.  Lattice units are 1/(3m) in x and 1/(2m) in y.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    m = HEX_BASE * 2**level
    X, Y = 3 * m, 2 * m
    offs = np.array([[2, 0], [1, 1], [-1, 1], [-2, 0], [-1, -1], [1, -1]])
    cells = []
    for j in range(m + 1):
        odd = j % 2
        for i in range(-1, m + 1):
            cx, cy = 3 * j, 2 * i + odd
            hexa = offs + (cx, cy)
            if cy + 1 <= 0 or cy - 1 >= Y:
                continue
            if hexa[:, 0].min() >= 0 and hexa[:, 0].max() <= X and hexa[:, 1].min() >= 0 \
                    and hexa[:, 1].max() <= Y:
                cells.append(hexa)
                continue
            clipped = _clip_box(hexa.astype(float), (0, 0), (X, Y))
            if len(clipped) < 3:
                continue
            q = np.rint(clipped).astype(np.int64)
            if np.abs(q - clipped).max() > 1e-9:
                raise AssertionError("hexagon clipping left the integer lattice")
            keep = np.any(q != np.roll(q, 1, axis=0), axis=1)
            q = q[keep]
            if len(q) >= 3 and signed_area(q.astype(float)) > 0:
                cells.append(q)
    return _lattice_mesh(cells, (1.0 / X, 1.0 / Y))


def _displace(p):
    s = 0.1 * np.sin(2 * np.pi * p[:, 0]) * np.sin(2 * np.pi * p[:, 1])
    # sin(2*pi) is not zero in floating point; keep the boundary exactly in place
    s[np.any((p == 0.0) | (p == 1.0), axis=1)] = 0.0
    return p + s[:, None]


def gen_transformed_hexagonal(level):
    """Hexagonal mesh with vertices moved by the smooth sine displacement map."""
    base = gen_hexagonal(level)
    v = _displace(base.vertices)
    for nv, idx in base.groups.items():
        pts = v[np.array([base.cells[c] for c in idx])]
        if np.any(signed_area(pts) <= 0):
            raise MeshError("transformed cell has non-positive area")
    mesh = PolyMesh(v, base.cells)
    _check_simple(mesh)
    return mesh


def gen_nonconvex(level):
    """Square grid with each square cut into two non-convex heptagons by a zig-zag.

    The cut runs from the left midpoint through (s/4, s/2-d), (s/2, s/2+d),
    (3s/4, s/2-d) to the right midpoint with d = 0.2 s.  Lattice units are
    s/4 in x and s/10 in y.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    n = NONCONVEX_BASE * 2**level
    cells = []
    for j in range(n):
        for i in range(n):
            x, y = 4 * i, 10 * j
            zig = [(x + 3, y + 3), (x + 2, y + 7), (x + 1, y + 3)]
            lower = [(x, y), (x + 4, y), (x + 4, y + 5), *zig, (x, y + 5)]
            upper = [(x, y + 5), *zig[::-1], (x + 4, y + 5), (x + 4, y + 10), (x, y + 10)]
            cells.append(np.array(lower))
            cells.append(np.array(upper))
    return _lattice_mesh(cells, (1.0 / (4 * n), 1.0 / (10 * n)))


FAMILIES = {
    "hex": gen_hexagonal,
    "hex_transformed": gen_transformed_hexagonal,
    "nonconvex": gen_nonconvex,
}


def generate(family, level):
    try:
        gen = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown mesh family {family!r}; expected one of {sorted(FAMILIES)}")
    return gen(level)


@dataclass(frozen=True)
class MeshQualityReport:
    cell_h: np.ndarray
    edge_ratio: np.ndarray
    h: float
    rho_obs: float
    kernel_ratio: np.ndarray = None

    @property
    def star_shaped(self):
        if self.kernel_ratio is None:
            return None
        return bool(np.all(self.kernel_ratio > 0))


def _check_simple(mesh):
    for nv, idx in mesh.groups.items():
        _, pts = mesh.group_coords(nv)
        if nv == 3:
            continue
        nxt = np.roll(pts, -1, axis=1)
        for i in range(nv):
            for j in range(i + 2, nv):
                if i == 0 and j == nv - 1:
                    continue
                a, b = pts[:, i], nxt[:, i]
                c, d = pts[:, j], nxt[:, j]
                d1 = cross2(b - a, c - a)
                d2 = cross2(b - a, d - a)
                d3 = cross2(d - c, a - c)
                d4 = cross2(d - c, b - c)
                hit = (d1 * d2 <= 0) & (d3 * d4 <= 0)
                # collinear-disjoint segments satisfy the product test only if they overlap
                both0 = (d1 == 0) & (d2 == 0)
                if np.any(both0):
                    ab = np.einsum("ij,ij->i", b - a, b - a)
                    t1 = np.einsum("ij,ij->i", c - a, b - a) / ab
                    t2 = np.einsum("ij,ij->i", d - a, b - a) / ab
                    overlap = (np.maximum(t1, t2) >= 0) & (np.minimum(t1, t2) <= 1)
                    hit = np.where(both0, overlap, hit)
                if np.any(hit):
                    bad = idx[np.nonzero(hit)[0][0]]
                    raise MeshError(f"cell {bad} is self-intersecting")


def kernel_radius(cell):
    """Radius of the largest disk inside the kernel of a CCW polygon (0 if the kernel is empty)."""
    p = np.asarray(cell, dtype=float)
    e = np.roll(p, -1, axis=0) - p
    n = np.column_stack((e[:, 1], -e[:, 0]))
    n /= np.linalg.norm(n, axis=1)[:, None]
    # outward normal n: points x with n.(x - p_i) + r <= 0 lie in the kernel with margin r
    A = np.column_stack((n, np.ones(len(p))))
    b = np.einsum("ij,ij->i", n, p)
    res = linprog([0, 0, -1], A_ub=A, b_ub=b, bounds=[(None, None), (None, None), (0, None)])
    return float(res.x[2]) if res.success else 0.0


def validate(mesh, check_star=False, domain=((0.0, 0.0), (1.0, 1.0))):
    """Structural checks plus quality diagnostics.

    Raises MeshError on non-CCW or self-intersecting cells, edges shared by
    more than two cells, and boundary edges that do not lie on the domain
    boundary.  Poor shape regularity is only reported.
    """
    for nv, idx in mesh.groups.items():
        _, pts = mesh.group_coords(nv)
        area = signed_area(pts)
        if np.any(area <= 0):
            bad = idx[np.nonzero(area <= 0)[0][0]]
            raise MeshError(f"cell {bad} is not counter-clockwise or has zero area")
    _check_simple(mesh)
    bedges = mesh.edges[mesh.boundary_edges]
    (x0, y0), (x1, y1) = domain
    pa, pb = mesh.vertices[bedges[:, 0]], mesh.vertices[bedges[:, 1]]
    on = np.zeros(len(bedges), dtype=bool)
    for axis, val in ((0, x0), (0, x1), (1, y0), (1, y1)):
        on |= (np.abs(pa[:, axis] - val) < 1e-10) & (np.abs(pb[:, axis] - val) < 1e-10)
    if not np.all(on):
        raise MeshError("dangling edge: boundary edge not on the domain boundary")
    total = mesh.areas.sum()
    if abs(total - (x1 - x0) * (y1 - y0)) > 1e-10:
        raise MeshError(f"cells do not tile the domain (total area {total!r})")

    cell_h = mesh.diameters
    ratio = np.empty(mesh.n_cells)
    for nv, idx in mesh.groups.items():
        _, pts = mesh.group_coords(nv)
        ratio[idx] = edge_lengths(pts).min(axis=1) / cell_h[idx]
    kr = None
    if check_star:
        kr = np.array([kernel_radius(mesh.cell_coords(c)) for c in range(mesh.n_cells)]) / cell_h
    return MeshQualityReport(cell_h, ratio, float(cell_h.max()), float(ratio.min()), kr)


def write_mesh(mesh, path):
    lines = ["polymesh 1", f"{mesh.n_vertices} {mesh.n_cells}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [" ".join(map(str, [len(c), *c])) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path):
    """Parse the text mesh format and run the structural validator."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        text = raw.split("#", 1)[0].strip()
        if text:
            rows.append((lineno, text.split()))
    if not rows:
        raise MeshParseError("missing header 'polymesh 1'")
    lineno, head = rows[0]
    if head != ["polymesh", "1"]:
        raise MeshParseError("expected header 'polymesh 1'", lineno)
    if len(rows) < 2:
        raise MeshParseError("missing counts section '<nv> <nc>'")
    lineno, counts = rows[1]
    try:
        nv, nc = map(int, counts)
    except ValueError:
        raise MeshParseError("expected '<nv> <nc>'", lineno)
    body = rows[2:]
    if len(body) < nv:
        raise MeshParseError(f"missing vertices section: expected {nv} vertex lines, found {len(body)}")
    verts = np.empty((nv, 2))
    for i, (lineno, tok) in enumerate(body[:nv]):
        if len(tok) != 2:
            raise MeshParseError("vertex line needs two coordinates", lineno)
        try:
            verts[i] = float(tok[0]), float(tok[1])
        except ValueError:
            raise MeshParseError("bad vertex coordinate", lineno)
    cell_rows = body[nv:]
    if len(cell_rows) < nc:
        raise MeshParseError(f"missing cells section: expected {nc} cell lines, found {len(cell_rows)}")
    if len(cell_rows) > nc:
        raise MeshParseError("trailing data after cells section", cell_rows[nc][0])
    cells = []
    for lineno, tok in cell_rows:
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError("bad cell index", lineno)
        if vals[0] != len(vals) - 1:
            raise MeshParseError(f"cell declares {vals[0]} vertices but lists {len(vals) - 1}", lineno)
        if vals[0] < 3 or min(vals[1:]) < 0 or max(vals[1:]) >= nv:
            raise MeshParseError("cell vertex index out of range", lineno)
        cells.append(vals[1:])
    mesh = PolyMesh(verts, tuple(cells))
    validate(mesh)
    return mesh
