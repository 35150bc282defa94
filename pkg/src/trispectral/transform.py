"""Analysis and synthesis for ``P^{(a,b,c)}`` expansions by tensor Gauss quadrature.

With ``y = (1 - x) t`` the weighted integral over the triangle factors as

    iint x^a y^b z^c g dA = int_0^1 x^a (1-x)^{b+c+1} int_0^1 t^b (1-t)^c g dt dx,

and ``P_{n,k} = P~_{n-k}^{(2k+b+c+1,a)}(x) (1-x)^k P~_k^{(c,b)}(t)``.  One
``(c, b)`` Gauss rule in ``t`` is shared by all ``k``; the outer rule has
weight ``(1-x)^{b+c+1} x^a`` and the extra ``(1-x)^k`` is part of the
integrand.  With ``N + 1`` nodes in each direction the transform is exact
for polynomials of total degree ``N``.  Cost is ``O(N^3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockbanded import dof
from .coefficients import EDGE, BasisTag, CoefficientVector
from .jacobi1d import _norm_squared, eval_forward, gauss_rule, norm_squared_1d
from .triops import ParameterTriple, mode_indices

__all__ = [
    "TriangleGrid",
    "NormalizationTable",
    "triangle_grid",
    "norm_constants",
    "analysis",
    "analysis_values",
    "synthesis",
    "legendre_edge_transform",
    "legendre_edge_synthesis",
]


@dataclass(frozen=True)
class TriangleGrid:
    """Tensor grid ``(x_i, (1 - x_i) t_j)`` adapted to the weight of ``p``."""

    p: tuple
    x: np.ndarray
    wx: np.ndarray
    t: np.ndarray
    wt: np.ndarray

    @property
    def points(self):
        """Physical coordinates as two ``(len(x), len(t))`` arrays."""
        X = np.repeat(self.x[:, None], self.t.size, axis=1)
        Y = (1 - self.x)[:, None] * self.t[None, :]
        return X, Y

    @property
    def shape(self):
        return self.x.size, self.t.size


@dataclass(frozen=True)
class NormalizationTable:
    """``d_{n,k} = iint w P_{n,k}^2`` in storage order."""

    p: tuple
    d: np.ndarray

    def __getitem__(self, nk):
        n, k = nk
        return float(self.d[dof(n - 1) + k])


def triangle_grid(p, n_points: int) -> TriangleGrid:
    a, b, c = ParameterTriple.of(p)
    outer = gauss_rule(b + c + 1, a, n_points)
    inner = gauss_rule(c, b, n_points)
    return TriangleGrid((a, b, c), outer.nodes, outer.weights, inner.nodes, inner.weights)


def norm_constants(p, N: int) -> NormalizationTable:
    a, b, c = ParameterTriple.of(p)
    n, k = mode_indices(N)
    d = np.empty(n.size)
    for kk in range(N + 1):
        sel = k == kk
        d[sel] = _norm_squared(2 * kk + b + c + 1, a, n[sel] - kk) * _norm_squared(c, b, kk)
    return NormalizationTable((a, b, c), d)


def _default_points(N: int) -> int:
    return N + 3


def _t_table(grid: TriangleGrid, N: int) -> np.ndarray:
    a, b, c = grid.p
    return eval_forward(c, b, N, grid.t)  # (N+1, nt)


def _x_table(grid: TriangleGrid, kk: int, N: int) -> np.ndarray:
    a, b, c = grid.p
    return eval_forward(2 * kk + b + c + 1, a, N - kk, grid.x) * (1 - grid.x) ** kk


def analysis_values(p, values, grid: TriangleGrid, N: int) -> CoefficientVector:
    """Coefficients from samples on ``grid`` (shape ``grid.shape``)."""
    p = ParameterTriple.of(p).astuple()
    if tuple(grid.p) != p:
        raise ValueError(f"grid built for {grid.p}, analysis requested in {p}")
    F = np.asarray(values, dtype=float)
    if F.shape != grid.shape:
        raise ValueError(f"values have shape {F.shape}, grid is {grid.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("non-finite samples")
    G = (F * grid.wt) @ _t_table(grid, N).T  # (nx, N+1): inner integrals per k
    out = np.empty(dof(N))
    n_idx, k_idx = mode_indices(N)
    for kk in range(N + 1):
        col = (_x_table(grid, kk, N) * grid.wx) @ G[:, kk]  # degrees n - k = 0..N-k
        sel = k_idx == kk
        out[sel] = col
    out /= norm_constants(p, N).d
    return CoefficientVector(BasisTag("P", p), out)


def analysis(p, f, N: int, n_points: int | None = None) -> CoefficientVector:
    """Expand ``f(x, y)`` (vectorized callable) in ``P^{p}`` up to degree ``N``."""
    grid = triangle_grid(p, n_points or _default_points(N))
    X, Y = grid.points
    vals = np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape)
    return analysis_values(p, vals, grid, N)


def synthesis(p, coeffs, grid: TriangleGrid) -> np.ndarray:
    """Values of the expansion on ``grid`` by the tensor formula."""
    p = ParameterTriple.of(p).astuple()
    vals = np.asarray(getattr(coeffs, "values", coeffs), dtype=float)
    N = CoefficientVector(BasisTag("P", p), vals).degree
    T = _t_table(grid, N)
    n_idx, k_idx = mode_indices(N)
    out = np.zeros(grid.shape)
    for kk in range(N + 1):
        ck = vals[k_idx == kk]  # n = kk..N
        xs = ck @ _x_table(grid, kk, N)
        out += np.outer(xs, T[kk])
    return out


def legendre_edge_transform(g, N: int, n_points: int | None = None) -> CoefficientVector:
    """Shifted-Legendre coefficients of ``g`` on ``[0, 1]`` up to degree ``N``."""
    rule = gauss_rule(0.0, 0.0, n_points or N + 3)
    vals = np.broadcast_to(np.asarray(g(rule.nodes), dtype=float), rule.nodes.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite samples")
    P = eval_forward(0.0, 0.0, N, rule.nodes)
    coeffs = (P * rule.weights) @ vals / norm_squared_1d(0.0, 0.0, np.arange(N + 1))
    return CoefficientVector(EDGE, coeffs)


def legendre_edge_synthesis(coeffs, s) -> np.ndarray:
    vals = np.asarray(getattr(coeffs, "values", coeffs), dtype=float)
    return vals @ eval_forward(0.0, 0.0, vals.size - 1, np.asarray(s, dtype=float))
