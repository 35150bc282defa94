"""Assembly and solution of linear PDEs on the unit triangle.

Square problems (zero-Dirichlet Poisson, Helmholtz, biharmonic) use a
weighted basis that already vanishes on the boundary.  The operator is cut
to degree ``N`` in both directions and factored with band LU.

Problems with boundary data expand the unknown in a Dirichlet basis ``Q`` and
stack restriction rows on top of the differential rows.  The result is
rectangular and is solved in least squares.  Generic systems of several
unknowns are described by :class:`PdeProblem`.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .blockbanded import (
    BlockBandedMatrix,
    RankDeficiencyError,
    band_lu_factor,
    dof,
    least_squares_solve,
)
from .coefficients import BasisTag, CoefficientVector
from .dirichlet import (
    full_restriction,
    q_conversion,
    q_derivative,
    restriction,
    tilde_laplacian,
)
from .evaluate import evaluate
from .transform import analysis, legendre_edge_transform
from .triops import (
    OperatorDescriptor,
    biharmonic,
    build,
    conversion_path,
    helmholtz_weighted,
    laplacian_weighted,
)

__all__ = [
    "RegimeError",
    "Unknown",
    "Equation",
    "PdeProblem",
    "PdeSolution",
    "solve_poisson_zero_dirichlet",
    "solve_helmholtz_zero_dirichlet",
    "solve_biharmonic",
    "solve_laplace_dirichlet",
    "solve_transport",
    "transport_regime",
    "solve_first_order_system",
    "q_partial",
    "edge_coefficients",
]

# dense QR up to this many unknowns, sparse augmented-system LU beyond
DENSE_LSTSQ_LIMIT = 1000


class RegimeError(ValueError):
    """Boundary data does not match what the equation needs."""


# ------------------------------------------------------------------ containers
@dataclass(frozen=True)
class Unknown:
    """One block of unknowns: a coefficient field or a set of scalar ``tau`` values."""

    name: str
    size: int
    basis: BasisTag | None = None


@dataclass
class Equation:
    """Rows ``sum_j terms[j] @ x_j = rhs``.

    Operators may have fewer rows than ``rhs``; they are zero-padded.
    """

    terms: dict
    rhs: np.ndarray
    label: str = ""


@dataclass
class PdeProblem:
    """A stacked block system over several unknowns.

    Parameters
    ----------
    unknowns : list of Unknown
        Column blocks in order.
    equations : list of Equation
        Row blocks in order; differential rows and boundary rows alike.
    N : int
        Truncation degree.
    """

    unknowns: list
    equations: list
    N: int

    def __post_init__(self):
        names = [u.name for u in self.unknowns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate unknown names")

    @property
    def n_tau(self) -> int:
        return sum(u.size for u in self.unknowns if u.basis is None)

    def column_offsets(self) -> dict:
        out, off = {}, 0
        for u in self.unknowns:
            out[u.name] = off
            off += u.size
        return out

    def assemble(self):
        """Global sparse matrix and right-hand side."""
        sizes = {u.name: u.size for u in self.unknowns}
        rows, rhs = [], []
        for eq in self.equations:
            b = np.asarray(eq.rhs, dtype=float).ravel()
            blocks = []
            for u in self.unknowns:
                op = eq.terms.get(u.name)
                if op is None:
                    blocks.append(sp.csr_matrix((b.size, u.size)))
                    continue
                m = op.tocsr() if isinstance(op, BlockBandedMatrix) else sp.csr_matrix(op)
                if m.shape[1] != u.size or m.shape[0] > b.size:
                    raise ValueError(
                        f"equation {eq.label!r}: term for {u.name!r} has shape {m.shape}, "
                        f"expected (<= {b.size}, {u.size})"
                    )
                if m.shape[0] < b.size:
                    m = sp.vstack([m, sp.csr_matrix((b.size - m.shape[0], u.size))])
                blocks.append(m)
            unknown = set(eq.terms) - set(sizes)
            if unknown:
                raise ValueError(f"equation {eq.label!r} refers to unknown fields {sorted(unknown)}")
            rows.append(sp.hstack(blocks))
            rhs.append(b)
        return sp.vstack(rows, format="csr"), np.concatenate(rhs)

    def solve(self, primary: str | None = None) -> "PdeSolution":
        t0 = time.perf_counter()
        A, b = self.assemble()
        t1 = time.perf_counter()
        x = sparse_least_squares(A, b)
        t2 = time.perf_counter()
        fields, taus, off = {}, [], 0
        for u in self.unknowns:
            part = x[off : off + u.size]
            off += u.size
            if u.basis is None:
                taus.append(part)
            else:
                fields[u.name] = CoefficientVector(u.basis, part)
        primary = primary or next(u.name for u in self.unknowns if u.basis is not None)
        return PdeSolution(
            u=fields[primary],
            tau=np.concatenate(taus) if taus else np.zeros(0),
            residual_norm=_relative_residual(A, x, b),
            block_norms=fields[primary].block_norms(),
            fields=fields,
            timings={"assemble": t1 - t0, "factor": 0.0, "solve": t2 - t1},
        )


@dataclass
class PdeSolution:
    """Solved coefficients with diagnostics.

    ``residual_norm`` is ``||A x - b|| / ||b||`` of the assembled system
    (absolute when ``b = 0``).  ``block_norms[n]`` is the 2-norm of the
    degree-``n`` block of ``u``.
    """

    u: CoefficientVector
    tau: np.ndarray
    residual_norm: float
    block_norms: np.ndarray
    fields: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def __call__(self, x, y):
        return evaluate(self.u, x, y)


# ------------------------------------------------------------------- solvers
def _relative_residual(A, x, b) -> float:
    r = np.linalg.norm(A @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


def sparse_least_squares(A, b) -> np.ndarray:
    """Least-squares solution of a full-column-rank system.

    Small systems use dense pivoted QR.  Larger ones solve the augmented
    system ``[[I, A], [A^T, 0]] [r; x] = [b; 0]`` by sparse LU, which keeps
    the conditioning of ``A`` rather than squaring it.
    """
    A = sp.csr_matrix(A)
    m, n = A.shape
    if n <= DENSE_LSTSQ_LIMIT:
        return least_squares_solve(A, b)
    scale = sp.linalg.norm(A, np.inf) or 1.0
    K = sp.bmat([[sp.identity(m) * scale, A], [A.T, None]], format="csc")
    rhs = np.concatenate([np.asarray(b, dtype=float), np.zeros(n)])
    try:
        lu = spla.splu(K, permc_spec="COLAMD")
    except RuntimeError as exc:  # exactly singular
        raise RankDeficiencyError(-1, n) from exc
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise RankDeficiencyError(-1, n)
    return sol[m:]


def _square_solve(op: BlockBandedMatrix, rhs: np.ndarray, basis: BasisTag, t_build: float) -> PdeSolution:
    t0 = time.perf_counter()
    lu = band_lu_factor(op.to_band())
    t1 = time.perf_counter()
    x = lu.solve(rhs)
    t2 = time.perf_counter()
    u = CoefficientVector(basis, x)
    return PdeSolution(
        u=u,
        tau=np.zeros(0),
        residual_norm=_relative_residual(op.tocsr(), x, rhs),
        block_norms=u.block_norms(),
        fields={"u": u},
        timings={"assemble": t_build, "factor": t1 - t0, "solve": t2 - t1},
    )


def _forcing(f, p: tuple, N: int) -> CoefficientVector:
    """``f`` as ``P^{p}`` coefficients of degree ``N``."""
    if f is None or (np.isscalar(f) and f == 0):
        return CoefficientVector.zeros(BasisTag("P", p), N)
    if isinstance(f, CoefficientVector):
        if f.basis.family != "P":
            raise ValueError(f"forcing must be a P expansion, got {f.basis}")
        src = f.basis.params
        if src != tuple(p):
            conv = conversion_path(src, p, f.degree)
            f = CoefficientVector(BasisTag("P", p), conv.matvec(f.values))
        return f.resize(N)
    if np.isscalar(f):
        c = float(f)
        return analysis(p, lambda x, y: np.full_like(x, c), N)
    return analysis(p, f, N)


def solve_poisson_zero_dirichlet(f, N: int) -> PdeSolution:
    """``Delta u = f`` with ``u = 0`` on the boundary.

    ``u`` is returned in the weighted basis ``xyz P^{(1,1,1)}``; ``f`` is a
    vectorized callable or a ``P`` coefficient vector.
    """
    t0 = time.perf_counter()
    op = laplacian_weighted(N).truncate(N + 1, N + 1)
    rhs = _forcing(f, (1, 1, 1), N).values
    return _square_solve(op, rhs, BasisTag("weightedP", (1, 1, 1)), time.perf_counter() - t0)


def _v_coefficients(v, N: int, v_degree: int | None) -> CoefficientVector:
    if isinstance(v, CoefficientVector):
        return v
    deg = v_degree if v_degree is not None else min(N, 20)
    vc = _forcing(v, (0, 0, 0), deg)
    scale = np.max(np.abs(vc.values)) or 1.0
    return vc.trim(1e-15 * scale)


def solve_helmholtz_zero_dirichlet(v, k: float, f, N: int | None = None, v_degree: int | None = None) -> PdeSolution:
    """``Delta u + k^2 v u = f`` with ``u = 0`` on the boundary.

    ``v`` is approximated by a polynomial of degree ``v_degree`` (default
    ``min(N, 20)``, trailing negligible blocks dropped).  ``N`` defaults to
    ``max(2k, 32)``.
    """
    if N is None:
        N = max(int(np.ceil(2 * abs(k))), 32)
    if N < 2 * abs(k):
        warnings.warn(f"N = {N} < 2k = {2 * abs(k):g}: oscillations are likely unresolved", stacklevel=2)
    t0 = time.perf_counter()
    vc = _v_coefficients(v, N, v_degree)
    op = helmholtz_weighted(vc, k, N).truncate(N + 1, N + 1)
    rhs = _forcing(f, (1, 1, 1), N).values
    return _square_solve(op, rhs, BasisTag("weightedP", (1, 1, 1)), time.perf_counter() - t0)


def solve_biharmonic(f, N: int) -> PdeSolution:
    """``Delta^2 u = f`` with ``u`` and its normal derivative zero on the boundary.

    ``u`` is returned in the weighted basis ``(xyz)^2 P^{(2,2,2)}``.
    """
    t0 = time.perf_counter()
    op = biharmonic(N).truncate(N + 1, N + 1)
    rhs = _forcing(f, (2, 2, 2), N).values
    return _square_solve(op, rhs, BasisTag("weightedP", (2, 2, 2)), time.perf_counter() - t0)


# ----------------------------------------------------------- boundary data
def edge_coefficients(g, N: int) -> np.ndarray:
    """Legendre coefficients (degree ``N``) of edge data.

    ``g`` is ``None`` (zero), a scalar, a callable of the edge parameter or an
    edge coefficient vector.
    """
    if g is None:
        return np.zeros(N + 1)
    if isinstance(g, CoefficientVector):
        if not g.basis.is_edge:
            raise ValueError(f"edge data must be a Legendre edge expansion, got {g.basis}")
        return g.resize(N).values
    if np.isscalar(g):
        out = np.zeros(N + 1)
        out[0] = float(g)
        return out
    return legendre_edge_transform(g, N).values


def q_partial(flags, direction: str, N: int) -> BlockBandedMatrix:
    """``d/dx`` or ``d/dy`` of a ``Q^{flags}`` expansion, landing in ``P^{(1,1,1)}``.

    Goes through ``P^{(0,0,0)}``, differentiates there and converts up.
    Rows reach degree ``N - 1``.
    """
    down = q_conversion(flags, (0, 0, 0), N)
    if direction == "x":
        d = build(OperatorDescriptor("Dx", (0, 0, 0)), N)
        up = build(OperatorDescriptor("S", (1, 0, 1), "b"), N - 1)
    elif direction == "y":
        d = build(OperatorDescriptor("Dy", (0, 0, 0)), N)
        up = build(OperatorDescriptor("S", (0, 1, 1), "a"), N - 1)
    else:
        raise ValueError(f"direction must be x or y, got {direction!r}")
    return up @ d @ down


def solve_laplace_dirichlet(f_edge, g_edge, h_edge, N: int, forcing=None) -> PdeSolution:
    """``Delta u = forcing`` (default 0) with ``u`` given on all three edges.

    ``f_edge`` is ``u(0, y)``, ``g_edge`` is ``u(x, 0)`` and ``h_edge`` is
    ``u(x, 1 - x)``.  Two ``tau`` unknowns add constants to the ``x = 0`` and
    ``y = 0`` edge rows and absorb corner mismatches in the data.  ``u`` is
    returned in ``Q^{(1,1,1)}``.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    t0 = time.perf_counter()
    R = full_restriction(N)
    T = np.zeros((3 * (N + 1), 2))
    T[0, 0] = 1.0
    T[N + 1, 1] = 1.0
    data = np.concatenate([edge_coefficients(g, N) for g in (f_edge, g_edge, h_edge)])
    rhs = _forcing(forcing, (1, 1, 1), N - 2).values
    problem = PdeProblem(
        [Unknown("tau", 2), Unknown("u", dof(N), BasisTag("Q", (1, 1, 1)))],
        [
            Equation({"tau": T, "u": R}, data, "restriction"),
            Equation({"u": tilde_laplacian(N)}, rhs, "laplacian"),
        ],
        N,
    )
    sol = problem.solve("u")
    sol.timings["assemble"] += time.perf_counter() - t0 - sum(sol.timings.values())
    return sol


# ---------------------------------------------------------------- transport
def transport_regime(c: float):
    """Basis flags and required inflow edges for ``u_y = c u_x``."""
    if 0 <= c <= 1:
        return (0, 1, 0), ("y",)
    if c > 1:
        return (0, 1, 1), ("y", "z")
    return (1, 1, 0), ("y", "x")


def solve_transport(c: float, boundary: dict, N: int) -> PdeSolution:
    """``u_y = c u_x`` with inflow data.

    ``boundary`` maps edge names to data: ``"y"`` is ``u(x, 0)``, ``"x"`` is
    ``u(0, y)`` and ``"z"`` is ``u(x, 1 - x)``.  Exactly the inflow edges of
    the regime must be given: the bottom for ``0 <= c <= 1``, bottom and
    hypotenuse for ``c > 1``, bottom and left for ``c < 0``.
    """
    flags, edges = transport_regime(float(c))
    given = set(boundary)
    if given != set(edges):
        raise RegimeError(
            f"c = {c} needs data on edges {sorted(edges)} (basis Q{flags}), got {sorted(given)}"
        )
    op = q_partial(flags, "y", N) - q_partial(flags, "x", N) * float(c)
    eqs = [Equation({"u": op}, np.zeros(dof(N - 1)), "transport")]
    for e in edges:
        r = restriction(e, flags, N)
        eqs.append(Equation({"u": r.matrix}, edge_coefficients(boundary[e], N), f"edge {e}"))
    problem = PdeProblem([Unknown("u", dof(N), BasisTag("Q", flags))], eqs, N)
    return problem.solve("u")


# ------------------------------------------------------ first-order systems
def _pad_rows(op: BlockBandedMatrix, n_blocks: int) -> BlockBandedMatrix:
    return op.pad(n_blocks, len(op.col_sizes))


def solve_first_order_system(f, N: int, boundary: str = "dirichlet", data: dict | None = None, mean: float = 0.0) -> PdeSolution:
    """Poisson ``Delta u = f`` written as ``v = u_x``, ``w = u_y``, ``v_x + w_y = f``.

    ``boundary="dirichlet"``: ``u`` in ``Q^{(1,1,1)}`` with values ``data[e]``
    on each edge; ``v``, ``w`` of degree ``N - 1`` in ``Q^{(1,0,1)}`` and
    ``Q^{(0,1,1)}``.

    ``boundary="neumann"``: ``u`` in ``P^{(0,0,0)}``; ``v`` in ``Q^{(1,0,1)}``
    and ``w`` in ``Q^{(0,1,1)}`` so their traces on the edges where they are
    normal derivatives are sparse.  ``data[e]`` is the outward normal
    derivative on edge ``e``; the free constant is fixed by the mean of
    ``u`` over the triangle.

    Returns a solution whose ``fields`` hold ``u``, ``v`` and ``w``.
    """
    data = data or {}
    bad = set(data) - {"x", "y", "z"}
    if bad:
        raise ValueError(f"unknown edges {sorted(bad)}")
    if boundary == "dirichlet":
        M = N - 1
        fx = _forcing(f, (0, 0, 0), M - 1).values
        ux = q_derivative((1, 0, 1), "x", N) @ q_conversion((1, 1, 1), (1, 0, 1), N)
        uy = q_derivative((0, 1, 1), "y", N) @ q_conversion((1, 1, 1), (0, 1, 1), N)
        eqs = [
            Equation({"u": full_restriction(N)},
                     np.concatenate([edge_coefficients(data.get(e), N) for e in "xyz"]), "dirichlet"),
            Equation({"u": ux, "v": -q_conversion((1, 0, 1), (0, 0, 0), M)}, np.zeros(dof(M)), "v = u_x"),
            Equation({"u": uy, "w": -q_conversion((0, 1, 1), (0, 0, 0), M)}, np.zeros(dof(M)), "w = u_y"),
            Equation({"v": q_derivative((1, 0, 1), "x", M), "w": q_derivative((0, 1, 1), "y", M)},
                     fx, "divergence"),
        ]
        unknowns = [
            Unknown("u", dof(N), BasisTag("Q", (1, 1, 1))),
            Unknown("v", dof(M), BasisTag("Q", (1, 0, 1))),
            Unknown("w", dof(M), BasisTag("Q", (0, 1, 1))),
        ]
    elif boundary == "neumann":
        fx = _forcing(f, (0, 0, 0), N - 1).values
        # D_x lands in P^{(1,0,1)} and D_y in P^{(0,1,1)}; v and w are converted to match
        sv = conversion_path((0, 0, 0), (1, 0, 1), N) @ q_conversion((1, 0, 1), (0, 0, 0), N)
        sw = conversion_path((0, 0, 0), (0, 1, 1), N) @ q_conversion((0, 1, 1), (0, 0, 0), N)
        dx = _pad_rows(build(OperatorDescriptor("Dx", (0, 0, 0)), N), N + 1)
        dy = _pad_rows(build(OperatorDescriptor("Dy", (0, 0, 0)), N), N + 1)
        rz = np.sqrt(2.0)
        mean_row = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, dof(N)))
        eqs = [
            Equation({"v": -restriction("x", (1, 0, 1), N).matrix}, edge_coefficients(data.get("x"), N), "edge x"),
            Equation({"w": -restriction("y", (0, 1, 1), N).matrix}, edge_coefficients(data.get("y"), N), "edge y"),
            Equation({"v": restriction("z", (1, 0, 1), N).matrix, "w": restriction("z", (0, 1, 1), N).matrix},
                     rz * edge_coefficients(data.get("z"), N), "edge z"),
            Equation({"u": dx, "v": -sv}, np.zeros(dof(N)), "v = u_x"),
            Equation({"u": dy, "w": -sw}, np.zeros(dof(N)), "w = u_y"),
            Equation({"v": q_derivative((1, 0, 1), "x", N), "w": q_derivative((0, 1, 1), "y", N)},
                     fx, "divergence"),
            Equation({"u": mean_row}, np.array([float(mean)]), "mean"),
        ]
        unknowns = [
            Unknown("u", dof(N), BasisTag("P", (0, 0, 0))),
            Unknown("v", dof(N), BasisTag("Q", (1, 0, 1))),
            Unknown("w", dof(N), BasisTag("Q", (0, 1, 1))),
        ]
    else:
        raise ValueError(f"boundary must be 'dirichlet' or 'neumann', got {boundary!r}")
    return PdeProblem(unknowns, eqs, N).solve("u")
