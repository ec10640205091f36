"""Arbitrary-order conforming virtual element methods on polygonal meshes."""

from .cases import CaseDefinition, gaussian, get_case, polynomial, registered_cases, sinsin
from .element import ElementOperators, MonomialBasis, element_operators
from .estimator import VEMPoisson
from .mesh import (
    PolyMesh,
    gen_hexagonal,
    gen_nonconvex,
    gen_transformed_hexagonal,
    generate,
    read_mesh,
    validate,
    write_mesh,
)
from .post import ErrorRecord, convergence_orders
from .system import assemble, apply_dirichlet, build_dofmap, solve

__version__ = "0.1.0"

__all__ = [
    "CaseDefinition",
    "ElementOperators",
    "ErrorRecord",
    "MonomialBasis",
    "PolyMesh",
    "VEMPoisson",
    "apply_dirichlet",
    "assemble",
    "build_dofmap",
    "convergence_orders",
    "element_operators",
    "gaussian",
    "gen_hexagonal",
    "gen_nonconvex",
    "gen_transformed_hexagonal",
    "generate",
    "get_case",
    "polynomial",
    "read_mesh",
    "registered_cases",
    "sinsin",
    "solve",
    "validate",
    "write_mesh",
]
