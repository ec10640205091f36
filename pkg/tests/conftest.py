import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_star_polygon, regular_polygon  # noqa: E402
from polyvem.mesh import gen_hexagonal  # noqa: E402


def single_cells():
    """The five reference cells: square, regular hexagon, random pentagon,
    random non-convex heptagon and a clipped boundary cell."""
    rng = np.random.default_rng(20240611)
    hexmesh = gen_hexagonal(0)
    # a hexagon cut down to a pentagon by the left edge of the square
    clipped = next(c for c in range(hexmesh.n_cells)
                   if len(hexmesh.cells[c]) == 5 and hexmesh.cell_coords(c)[:, 0].min() == 0.0)
    return {
        "square": np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        "hexagon": regular_polygon(6, r=0.5, center=(0.5, 0.5)),
        "pentagon": 0.3 * random_star_polygon(rng, 5) + 0.4,
        "nonconvex": 0.3 * random_star_polygon(rng, 7, dent=True) + 0.5,
        "clipped": hexmesh.cell_coords(clipped),
    }


@pytest.fixture(scope="session")
def cells():
    return single_cells()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
