"""Sparse spectral methods for linear PDEs on triangles.

Jacobi polynomials on the unit simplex, their banded operator calculus,
Dirichlet bases with sparse edge restriction, and solvers built on them.
"""

from .blockbanded import BlockBandedMatrix, dof
from .coefficients import BasisTag, CoefficientVector, read_coefficients, write_coefficients
from .dirichlet import full_restriction, q_conversion, q_derivative, q_eval, restriction, tilde_laplacian
from .evaluate import clenshaw, evaluate, multiplication_operator
from .pde import (
    PdeProblem,
    PdeSolution,
    solve_biharmonic,
    solve_first_order_system,
    solve_helmholtz_zero_dirichlet,
    solve_laplace_dirichlet,
    solve_poisson_zero_dirichlet,
    solve_transport,
)
from .polygon import PolygonMesh, TriangleElement, hexagon_mesh, solve_polygon_helmholtz
from .transform import analysis, synthesis
from .triops import (
    biharmonic,
    conversion,
    differentiation,
    jacobi_operators,
    laplacian_strong,
    laplacian_weighted,
    lowering,
    weighted_differentiation,
)

__version__ = "0.1.0"


def clear_caches() -> None:
    """Drop all memoized operators, e.g. before timing a cold build."""
    import importlib

    from . import dirichlet, triops

    _ev = importlib.import_module(".evaluate", __name__)

    for fn in (
        triops._modes,
        triops._build_cached,
        triops._jacobi_transposes,
        _ev._stages,
        dirichlet._step,
        dirichlet._derivative,
        dirichlet._select,
    ):
        fn.cache_clear()


__all__ = [
    "BasisTag",
    "BlockBandedMatrix",
    "CoefficientVector",
    "PdeProblem",
    "PdeSolution",
    "PolygonMesh",
    "TriangleElement",
    "analysis",
    "biharmonic",
    "clear_caches",
    "clenshaw",
    "conversion",
    "differentiation",
    "dof",
    "evaluate",
    "full_restriction",
    "jacobi_operators",
    "laplacian_strong",
    "laplacian_weighted",
    "lowering",
    "multiplication_operator",
    "hexagon_mesh",
    "q_conversion",
    "q_derivative",
    "q_eval",
    "read_coefficients",
    "restriction",
    "solve_biharmonic",
    "solve_first_order_system",
    "solve_helmholtz_zero_dirichlet",
    "solve_laplace_dirichlet",
    "solve_poisson_zero_dirichlet",
    "solve_polygon_helmholtz",
    "solve_transport",
    "synthesis",
    "tilde_laplacian",
    "weighted_differentiation",
    "write_coefficients",
]
