"""Helmholtz and Laplace problems on polygons split into triangles.

Each element carries three fields in ``Q^{(1,1,1)}``: the solution ``u`` and
its reference-coordinate derivatives ``v = u_xi`` and ``w = u_eta``.  The
element map is affine, ``X = X0 + A (xi, eta)``, so physical derivatives are
constant combinations of reference ones: ``grad_X = G^T grad_ref`` with
``G = A^{-1}``.

Local edges follow the reference parameterizations: edge ``x`` runs from
vertex 0 to vertex 2, edge ``y`` from vertex 0 to vertex 1 and edge ``z``
from vertex 2 to vertex 1.  A shared edge traversed in opposite directions by
its two elements has its Legendre coefficients multiplied by ``(-1)^n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .blockbanded import dof
from .coefficients import BasisTag, CoefficientVector
from .dirichlet import edge_points, q_conversion, q_derivative, restriction
from .evaluate import clenshaw
from .pde import Equation, PdeProblem, PdeSolution, Unknown, edge_coefficients, q_partial
from .transform import analysis
from .triops import OperatorDescriptor, build, conversion_path

__all__ = [
    "TriangleElement",
    "PolygonMesh",
    "Interface",
    "PolygonSolution",
    "hexagon_mesh",
    "solve_polygon_helmholtz",
    "q_gradient",
]

_LOCAL_EDGES = {"x": (0, 2), "y": (0, 1), "z": (2, 1)}
Q111 = BasisTag("Q", (1, 1, 1))


@dataclass(frozen=True)
class TriangleElement:
    """A physical triangle; vertex ``i`` maps to reference vertex ``(0,0), (1,0), (0,1)``."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (3, 2):
            raise ValueError(f"a triangle needs 3 vertices in the plane, got shape {v.shape}")
        object.__setattr__(self, "vertices", v)
        if abs(np.linalg.det(self.jacobian)) < 1e-14:
            raise ValueError("degenerate triangle")

    @property
    def jacobian(self) -> np.ndarray:
        """``A`` with columns ``V1 - V0`` and ``V2 - V0``."""
        v = self.vertices
        return np.column_stack([v[1] - v[0], v[2] - v[0]])

    @property
    def inverse_jacobian(self) -> np.ndarray:
        return np.linalg.inv(self.jacobian)

    def to_physical(self, xi, eta):
        xi, eta = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
        A = self.jacobian
        v0 = self.vertices[0]
        return v0[0] + A[0, 0] * xi + A[0, 1] * eta, v0[1] + A[1, 0] * xi + A[1, 1] * eta

    def to_reference(self, x, y):
        G = self.inverse_jacobian
        dx = np.asarray(x, dtype=float) - self.vertices[0, 0]
        dy = np.asarray(y, dtype=float) - self.vertices[0, 1]
        return G[0, 0] * dx + G[0, 1] * dy, G[1, 0] * dx + G[1, 1] * dy

    def edge_endpoints(self, edge: str):
        i, j = _LOCAL_EDGES[edge]
        return self.vertices[i], self.vertices[j]

    def outward_normal(self, edge: str) -> np.ndarray:
        a, b = self.edge_endpoints(edge)
        t = (b - a) / np.linalg.norm(b - a)
        n = np.array([t[1], -t[0]])
        centroid = self.vertices.mean(axis=0)
        return n if np.dot(n, a - centroid) > 0 else -n

    def contains(self, x, y, tol=1e-12):
        xi, eta = self.to_reference(x, y)
        return (xi >= -tol) & (eta >= -tol) & (xi + eta <= 1 + tol)


@dataclass(frozen=True)
class Interface:
    """Edge ``edge_a`` of element ``a`` coincides with edge ``edge_b`` of element ``b``."""

    a: int
    edge_a: str
    b: int
    edge_b: str
    reversed: bool


class PolygonMesh:
    """Conforming triangulation: shared edges must match end to end."""

    def __init__(self, elements, tol: float = 1e-12):
        self.elements = [e if isinstance(e, TriangleElement) else TriangleElement(e) for e in elements]
        if not self.elements:
            raise ValueError("empty mesh")
        self.tol = tol
        self.interfaces, self.boundary = self._match()

    @classmethod
    def from_vertices(cls, vertices, triangles, tol: float = 1e-12) -> "PolygonMesh":
        v = np.asarray(vertices, dtype=float)
        return cls([v[list(t)] for t in triangles], tol)

    def _same(self, p, q) -> bool:
        return bool(np.linalg.norm(p - q) <= self.tol)

    def _match(self):
        interfaces, used = [], set()
        for i, ei in enumerate(self.elements):
            for a in "xyz":
                if (i, a) in used:
                    continue
                pa, qa = ei.edge_endpoints(a)
                for j in range(i + 1, len(self.elements)):
                    for b in "xyz":
                        pb, qb = self.elements[j].edge_endpoints(b)
                        if self._same(pa, pb) and self._same(qa, qb):
                            rev = False
                        elif self._same(pa, qb) and self._same(qa, pb):
                            rev = True
                        else:
                            continue
                        interfaces.append(Interface(i, a, j, b, rev))
                        used |= {(i, a), (j, b)}
        boundary = [(i, a) for i in range(len(self.elements)) for a in "xyz" if (i, a) not in used]
        verts = np.concatenate([e.vertices for e in self.elements])
        for i, a in boundary:
            p, q = self.elements[i].edge_endpoints(a)
            d = q - p
            L2 = d @ d
            s = (verts - p) @ d / L2
            dist = np.linalg.norm(verts - p - np.outer(s, d), axis=1)
            hanging = (s > self.tol) & (s < 1 - self.tol) & (dist <= self.tol)
            if np.any(hanging):
                raise ValueError(
                    f"mesh inconsistency: edge {a} of element {i} partially overlaps another element's edge"
                )
        return interfaces, boundary

    def __len__(self):
        return len(self.elements)

    def locate(self, x: float, y: float) -> int:
        for i, e in enumerate(self.elements):
            if e.contains(x, y):
                return i
        raise ValueError(f"point ({x}, {y}) is outside the mesh")


def hexagon_mesh() -> PolygonMesh:
    """Hexagonal reference domain split into four triangles."""
    v = [(0, 0), (1, 0), (1, 1), (0, 2), (0, 1), (-1, 1.5)]
    return PolygonMesh.from_vertices(v, [(0, 1, 2), (0, 2, 4), (2, 3, 4), (0, 4, 5)])


def q_gradient(coeffs, x, y):
    """Reference gradient ``(d/dxi, d/deta)`` of a ``Q^{(1,1,1)}`` expansion."""
    vals = np.asarray(getattr(coeffs, "values", coeffs), dtype=float)
    N = CoefficientVector(Q111, vals).degree
    if N == 0:
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy()
    p = q_conversion((1, 1, 1), (0, 0, 0), N).matvec(vals)
    gx = build(OperatorDescriptor("Dx", (0, 0, 0)), N).matvec(p)
    gy = build(OperatorDescriptor("Dy", (0, 0, 0)), N).matvec(p)
    return clenshaw((1, 0, 1), gx, x, y), clenshaw((0, 1, 1), gy, x, y)


@dataclass
class PolygonSolution:
    """Per-element solutions with helpers to evaluate and to measure interface jumps."""

    mesh: PolygonMesh
    elements: list
    residual_norm: float

    def __call__(self, x, y):
        x, y = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(y, dtype=float))
        out = np.full(x.shape, np.nan)
        for i, e in enumerate(self.mesh.elements):
            sel = e.contains(x, y) & np.isnan(out)
            if np.any(sel):
                xi, eta = e.to_reference(x[sel], y[sel])
                out[sel] = self.elements[i](np.clip(xi, 0, 1), np.clip(eta, 0, 1))
        return out

    def physical_gradient(self, i: int, x, y):
        e = self.mesh.elements[i]
        xi, eta = e.to_reference(x, y)
        gxi, geta = q_gradient(self.elements[i].u, np.clip(xi, 0, 1), np.clip(eta, 0, 1))
        G = e.inverse_jacobian
        return G[0, 0] * gxi + G[1, 0] * geta, G[0, 1] * gxi + G[1, 1] * geta

    def interface_jumps(self, n_points: int = 20):
        """Max jumps of value and normal derivative over all interfaces.

        Values come from the ``u`` fields directly, not from the auxiliary
        derivative fields.
        """
        s = np.linspace(0.02, 0.98, n_points)
        jv = jn = 0.0
        for itf in self.mesh.interfaces:
            ea = self.mesh.elements[itf.a]
            xr, yr = edge_points(itf.edge_a, s)
            X, Y = ea.to_physical(xr, yr)
            ua = self.elements[itf.a](xr, yr)
            eb = self.mesh.elements[itf.b]
            xb, yb = eb.to_reference(X, Y)
            ub = self.elements[itf.b](np.clip(xb, 0, 1), np.clip(yb, 0, 1))
            n = ea.outward_normal(itf.edge_a)
            ga = self.physical_gradient(itf.a, X, Y)
            gb = self.physical_gradient(itf.b, X, Y)
            jv = max(jv, float(np.max(np.abs(ua - ub))))
            jn = max(jn, float(np.max(np.abs(n[0] * (ga[0] - gb[0]) + n[1] * (ga[1] - gb[1])))))
        return jv, jn


def _flip(N: int) -> sp.csr_matrix:
    return sp.diags((-1.0) ** np.arange(N + 1)).tocsr()


def _edge_data(g, element: TriangleElement, edge: str, N: int) -> np.ndarray:
    if g is None or np.isscalar(g):
        return edge_coefficients(g, N)

    def along(s):
        X, Y = element.to_physical(*edge_points(edge, s))
        return g(X, Y)

    return edge_coefficients(along, N)


def solve_polygon_helmholtz(mesh: PolygonMesh, k: float, boundary, N: int, forcing=None) -> PolygonSolution:
    """``Delta u + k^2 u = forcing`` on the mesh with Dirichlet data ``boundary``.

    ``boundary`` and ``forcing`` are scalars or vectorized callables of the
    physical coordinates.  Value and normal derivative are matched across
    every interface; all rows are solved together in least squares.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    nd = dof(N)
    to_p111 = conversion_path((0, 0, 0), (1, 1, 1), N) @ q_conversion((1, 1, 1), (0, 0, 0), N)
    to_p000 = q_conversion((1, 1, 1), (0, 0, 0), N)
    dxi, deta = q_partial((1, 1, 1), "x", N), q_partial((1, 1, 1), "y", N)
    # u_xi in P^{(0,0,0)}: Q^{(1,1,1)} -> Q^{(1,0,1)} -> d/dxi
    uxi = q_derivative((1, 0, 1), "x", N) @ q_conversion((1, 1, 1), (1, 0, 1), N)
    ueta = q_derivative((0, 1, 1), "y", N) @ q_conversion((1, 1, 1), (0, 1, 1), N)
    R = {e: restriction(e, (1, 1, 1), N).matrix.tocsr() for e in "xyz"}

    unknowns, eqs = [], []
    for i, el in enumerate(mesh.elements):
        unknowns += [Unknown(f"u{i}", nd, Q111), Unknown(f"v{i}", nd, Q111), Unknown(f"w{i}", nd, Q111)]
        G = el.inverse_jacobian
        M = G @ G.T
        eqs.append(Equation({f"u{i}": uxi, f"v{i}": -to_p000}, np.zeros(nd), f"v{i} = u_xi"))
        eqs.append(Equation({f"u{i}": ueta, f"w{i}": -to_p000}, np.zeros(nd), f"w{i} = u_eta"))
        lap_v = dxi * M[0, 0] + deta * M[0, 1]
        lap_w = dxi * M[1, 0] + deta * M[1, 1]
        if forcing is None or np.isscalar(forcing):
            c = 0.0 if forcing is None else float(forcing)
            rhs = np.zeros(nd)
            rhs[0] = c
        else:
            rhs = analysis((1, 1, 1), lambda a, b, el=el: forcing(*el.to_physical(a, b)), N).values
        terms = {f"v{i}": lap_v, f"w{i}": lap_w}
        if k != 0:
            terms[f"u{i}"] = to_p111 * (k * k)
        eqs.append(Equation(terms, rhs, f"pde {i}"))
    for i, e in mesh.boundary:
        eqs.append(Equation({f"u{i}": R[e]}, _edge_data(boundary, mesh.elements[i], e, N), f"dirichlet {i}{e}"))
    for itf in mesh.interfaces:
        O = _flip(N) if itf.reversed else sp.identity(N + 1, format="csr")
        a, b = itf.a, itf.b
        Ra, Rb = R[itf.edge_a], O @ R[itf.edge_b]
        eqs.append(Equation({f"u{a}": Ra, f"u{b}": -Rb}, np.zeros(N + 1), f"value {a}{itf.edge_a}|{b}{itf.edge_b}"))
        n = mesh.elements[a].outward_normal(itf.edge_a)
        ca = mesh.elements[a].inverse_jacobian @ n
        cb = mesh.elements[b].inverse_jacobian @ n
        eqs.append(Equation(
            {f"v{a}": Ra * ca[0], f"w{a}": Ra * ca[1], f"v{b}": -Rb * cb[0], f"w{b}": -Rb * cb[1]},
            np.zeros(N + 1), f"flux {a}{itf.edge_a}|{b}{itf.edge_b}",
        ))
    sol = PdeProblem(unknowns, eqs, N).solve("u0")
    parts = []
    for i in range(len(mesh)):
        u = sol.fields[f"u{i}"]
        parts.append(PdeSolution(
            u=u, tau=np.zeros(0), residual_norm=sol.residual_norm, block_norms=u.block_norms(),
            fields={"u": u, "v": sol.fields[f"v{i}"], "w": sol.fields[f"w{i}"]},
        ))
    return PolygonSolution(mesh, parts, sol.residual_norm)
