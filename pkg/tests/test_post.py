import numpy as np
import pytest

from oracles import DenseVEM, random_star_polygon
from polyvem.cases import get_case, polynomial
from polyvem.cli import run_level
from polyvem.element import element_operators, n_local_dofs
from polyvem.mesh import generate
from polyvem.post import (
    CSV_COLUMNS,
    ErrorRecord,
    convergence_orders,
    discrete_linf,
    discrete_w1inf,
    eval_projection,
    l2_h1_errors,
    records_to_csv,
    records_to_markdown,
)
from polyvem.system import build_dofmap, element_batches, interpolate


def record(level, h, e, family="hex", k=1):
    return ErrorRecord(family, k, level, 10 * 4**level, h, e, e, e, e)


def test_projection_of_monomials():
    cell = random_star_polygon(np.random.default_rng(2), 6)
    ops = element_operators(cell, 2)
    pts = cell[None, :3] * 0.5
    ones = ops.D[:, :, 0]
    assert eval_projection(ops, ones, pts, "projection") == pytest.approx(np.ones((1, 3)))
    assert np.abs(eval_projection(ops, ones, pts, "grad_projection")).max() <= 1e-13
    g = eval_projection(ops, ops.D[:, :, 1], pts, "grad_projection")
    assert g[0] == pytest.approx(np.tile([1 / ops.basis.h[0], 0.0], (3, 1)))
    with pytest.raises(ValueError):
        eval_projection(ops, ones, pts, "hessian")


def test_projection_matches_oracle():
    rng = np.random.default_rng(9)
    cell = random_star_polygon(rng, 5)
    ops = element_operators(cell, 2)
    ref = DenseVEM(cell, 2).all()
    v = rng.standard_normal(n_local_dofs(2, 5))
    pts = 0.3 * rng.uniform(-1, 1, (4, 2))
    oracle = DenseVEM(cell, 2)
    mono = np.array([[oracle.mono(p, e) for e in oracle.ex] for p in pts])
    for which, key in (("projection", "pi_grad"), ("l2_projection", "pi0")):
        got = eval_projection(ops, v[None], pts[None], which)[0]
        assert got == pytest.approx(mono @ (ref[key] @ v), abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("family", ["hex", "hex_transformed", "nonconvex"])
def test_interpolated_polynomial_has_zero_error(family, k):
    rng = np.random.default_rng(k)
    coef = np.zeros((k + 1, k + 1))
    for a in range(k + 1):
        coef[a, : k + 1 - a] = rng.standard_normal(k + 1 - a)
    case = polynomial(coef)
    m = generate(family, 0)
    dm = build_dofmap(m, k)
    ops = list(element_batches(m, k))
    x = interpolate(m, dm, case.u, operators=ops)
    assert discrete_linf(m, x, case.u) == 0.0
    assert discrete_w1inf(m, dm, ops, x, case.grad_u) <= 1e-10
    e_l2, e_h1 = l2_h1_errors(m, dm, ops, x, case.u, case.grad_u)
    assert e_l2 <= 1e-9 and e_h1 <= 1e-9


def test_zero_function_zero_errors():
    m = generate("nonconvex", 0)
    dm = build_dofmap(m, 2)
    ops = list(element_batches(m, 2))
    zero = lambda p: np.zeros(p.shape[:-1])  # noqa: E731
    zgrad = lambda p: np.zeros(p.shape)  # noqa: E731
    assert l2_h1_errors(m, dm, ops, np.zeros(dm.n_dof), zero, zgrad) == (0.0, 0.0)


def test_interior_hex_vertices_touch_three_cells():
    m = generate("hex", 0)
    counts = np.array([len(c) for c in m.vertex_cells])
    assert np.all(counts[~m.boundary_vertices] == 3)


def test_orders():
    recs = convergence_orders([record(0, 0.2, 1e-2), record(1, 0.1, 2.5e-3), record(2, 0.05, 6.25e-4)])
    assert recs[0].order_linf is None
    assert recs[1].order_linf == pytest.approx(2.0)
    assert recs[2].order_h1 == pytest.approx(2.0)


def test_orders_undefined_for_zero_error_and_grouped():
    recs = convergence_orders([
        record(0, 0.2, 1e-2), record(0, 0.2, 1e-3, k=2), record(1, 0.1, 0.0), record(1, 0.1, 1.25e-4, k=2)])
    assert recs[2].order_linf is None
    assert recs[3].order_linf == pytest.approx(3.0)


def test_csv_layout():
    recs = convergence_orders([record(0, 0.2, 1e-2), record(1, 0.1, 2.5e-3)])
    lines = records_to_csv(recs).splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    first = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert first["order_linf"] == "" and first["e_linf"] == "1.0000000000e-02"
    second = dict(zip(CSV_COLUMNS, lines[2].split(",")))
    assert second["order_l2"] == "2.0000"


def test_markdown_layout():
    recs = convergence_orders([record(0, 0.2, 1e-2), record(1, 0.1, 2.5e-3)])
    text = records_to_markdown(recs, "demo")
    assert text.startswith("### demo")
    assert "| hex | k=1 | 40 |" in text
    assert "| -- |" in text and "| 2.00 |" in text


def test_h1_error_decreases_for_sinsin():
    case = get_case("sinsin")
    recs = [run_level(case, "hex", 1, lev) for lev in range(3)]
    errs = [r.e_h1 for r in recs]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert all(r.e_linf >= 0 and r.e_w1inf >= 0 for r in recs)
