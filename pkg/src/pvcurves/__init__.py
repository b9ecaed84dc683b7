"""Exact extraction of parallel-vector curves on tetrahedral meshes."""

from .eigensystem import Degeneracy, TetPolynomials, tet_polynomials, triangle_characteristic
from .extraction import ExtractionResult, Tolerances, extract
from .intervals import LambdaInterval, LambdaIntervalSet, feasible_regions, solve_inequality
from .mesh import TetMesh, sujudi_haimes_field, tessellate_grid
from .polynomial import CubicPolynomial, real_roots

__all__ = [
    "CubicPolynomial",
    "Degeneracy",
    "ExtractionResult",
    "LambdaInterval",
    "LambdaIntervalSet",
    "TetMesh",
    "TetPolynomials",
    "Tolerances",
    "extract",
    "feasible_regions",
    "real_roots",
    "solve_inequality",
    "sujudi_haimes_field",
    "tessellate_grid",
    "tet_polynomials",
    "triangle_characteristic",
]
