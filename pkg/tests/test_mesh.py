import numpy as np
import pytest

from polyvem.mesh import (
    FAMILIES,
    MeshError,
    MeshParseError,
    PolyMesh,
    gen_hexagonal,
    gen_nonconvex,
    gen_transformed_hexagonal,
    generate,
    kernel_radius,
    read_mesh,
    validate,
    write_mesh,
)

# counts of the level-0 meshes, checked against a plot of each mesh and
# against Euler's formula V - E + F = 1 for a tiling of the square
GOLDEN_LEVEL0 = {
    "hex": (564, 281),
    "hex_transformed": (564, 281),
    "nonconvex": (345, 128),
}


@pytest.fixture(scope="module", params=sorted(FAMILIES))
def family(request):
    return request.param


@pytest.mark.parametrize("level", [0, 1])
def test_tiling(family, level):
    m = generate(family, level)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(m.areas > 0)
    counts = np.sum(m.edge_cells >= 0, axis=1)
    assert np.all(counts[~m.boundary_edges] == 2)
    assert np.all(counts[m.boundary_edges] == 1)
    validate(m)


def test_golden_level0(family):
    m = generate(family, 0)
    assert (m.n_vertices, m.n_cells) == GOLDEN_LEVEL0[family]
    assert m.n_vertices - m.n_edges + m.n_cells == 1


def test_refinement_halves_h_and_quadruples_vertices(family):
    meshes = [generate(family, lev) for lev in range(3)]
    for a, b in zip(meshes, meshes[1:]):
        assert b.h / a.h == pytest.approx(0.5, rel=0.05)
    assert 3.7 <= meshes[2].n_vertices / meshes[1].n_vertices <= 4.3


def test_edges_are_canonical():
    m = gen_hexagonal(0)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    assert len({tuple(e) for e in m.edges}) == m.n_edges


def test_hexagonal_structure():
    m = gen_hexagonal(0)
    sizes = np.array([len(c) for c in m.cells])
    assert np.sum(sizes == 6) > 0.8 * m.n_cells
    # interior cells are hexagons; clipped cells touch the boundary
    bverts = m.boundary_vertices
    for c, loop in enumerate(m.cells):
        if len(loop) != 6:
            assert np.any(bverts[list(loop)])


def test_transform_fixes_boundary_and_moves_quarter_point():
    base = gen_hexagonal(1)
    m = gen_transformed_hexagonal(1)
    assert all(np.array_equal(a, b) for a, b in zip(m.cells, base.cells))
    b = base.boundary_vertices
    assert np.array_equal(m.vertices[b], base.vertices[b])
    disp = np.linalg.norm(m.vertices - base.vertices, axis=1)
    assert disp.max() <= 0.1 * np.sqrt(2) + 1e-15
    assert np.abs(m.vertices - base.vertices).max() <= 0.1 + 1e-15
    # the map itself at an arbitrary interior point
    from polyvem.mesh import _displace

    assert _displace(np.array([[0.25, 0.25]])) == pytest.approx(np.array([[0.35, 0.35]]))


def _reflex(poly):
    e0 = poly - np.roll(poly, 1, axis=0)
    e1 = np.roll(poly, -1, axis=0) - poly
    return np.any(e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0] < -1e-14)


@pytest.mark.parametrize("level", [0, 1])
def test_nonconvex_cells(level):
    m = gen_nonconvex(level)
    n = 8 * 2**level
    assert m.n_cells == 2 * n * n
    assert all(_reflex(m.cell_coords(c)) for c in range(m.n_cells))
    # cells come in pairs, one pair per grid square
    assert np.allclose(m.areas.reshape(-1, 2).sum(axis=1), 1.0 / n**2, rtol=0, atol=1e-15)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-12)


def test_validate_unit_square():
    m = PolyMesh(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), ((0, 1, 2, 3),))
    rep = validate(m)
    assert rep.h == pytest.approx(np.sqrt(2))
    assert rep.rho_obs == pytest.approx(1 / np.sqrt(2))
    assert 0 < rep.rho_obs <= 1


def test_validate_reports_star_shapedness():
    m = gen_nonconvex(0)
    rep = validate(m, check_star=True)
    assert rep.star_shaped
    assert rep.h == pytest.approx(m.diameters.max())
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert kernel_radius(sq) == pytest.approx(0.5)


def test_bowtie_is_rejected():
    verts = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float)
    with pytest.raises(MeshError):
        validate(PolyMesh(verts, ((0, 1, 2, 3),)))


def test_clockwise_cell_is_rejected():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    with pytest.raises(MeshError):
        validate(PolyMesh(verts, ((0, 3, 2, 1),)))


def test_round_trip(tmp_path):
    m = gen_hexagonal(1)
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    r = read_mesh(path)
    assert np.array_equal(r.vertices, m.vertices)
    assert len(r.cells) == len(m.cells)
    assert all(np.array_equal(a, b) for a, b in zip(r.cells, m.cells))


def test_two_cells_sharing_an_edge(tmp_path):
    text = """polymesh 1
# two squares; the shared edge 1-4 is traversed in opposite directions
6 2
0 0
0.5 0
1 0
0 1
0.5 1
1 1
4 0 1 4 3
4 1 2 5 4
"""
    path = tmp_path / "two.txt"
    path.write_text(text)
    m = read_mesh(path)
    assert m.n_cells == 2 and m.n_edges == 7
    shared = np.nonzero(~m.boundary_edges)[0]
    assert len(shared) == 1
    assert m.cell_edge_forward[0][1] != m.cell_edge_forward[1][3]


def test_truncated_file_names_missing_section(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("polymesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n")
    with pytest.raises(MeshParseError, match="cells"):
        read_mesh(path)
    path.write_text("polymesh 1\n4 1\n0 0\n1 0\n")
    with pytest.raises(MeshParseError, match="vertices"):
        read_mesh(path)


def test_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("polymesh 1\n4 1\n0 0\n1 x\n1 1\n0 1\n4 0 1 2 3\n")
    with pytest.raises(MeshParseError) as info:
        read_mesh(path)
    assert info.value.lineno == 4


def test_unknown_family():
    with pytest.raises(ValueError):
        generate("triangles", 0)
