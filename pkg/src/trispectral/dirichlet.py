"""Dirichlet bases ``Q^{(a,b,c)}``, their conversions, derivatives and edge restrictions.

``a``, ``b`` and ``c`` flag the edges ``x = 0``, ``y = 0`` and ``z = 0``
respectively.  Each flagged family is the weighted ``P`` basis for its
weight augmented with a few edge polynomials, so that every ``Q_{n,k}``
vanishes on a flagged edge except for one index per degree.  The trace on
that edge is then a single shifted Legendre polynomial and restriction is a
selection.  ``Q^{(0,0,0)}`` is ``P^{(0,0,0)}``.

Edge parameterizations: ``x = 0`` by ``y``; ``y = 0`` by ``x``; ``z = 0`` by
``x`` at the point ``(x, 1 - x)``.

Conversions lower flags one at a time along the lattice
``(1,1,1) -> (0,1,1), (1,0,1), (1,1,0) -> (1,0,0), (0,1,0), (0,0,1) ->
(0,0,0)`` and are block upper-bidiagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .blockbanded import BlockBandedMatrix, degree_sizes, dof
from .coefficients import EDGE, BasisTag, CoefficientVector
from .evaluate import clenshaw, forward_recurrence
from .jacobi1d import eval_forward
from .triops import OperatorDescriptor, assemble, build, mode_indices

__all__ = [
    "EdgeFlags",
    "RestrictionOperator",
    "EDGES",
    "q_basis_values",
    "q_eval",
    "q_conversion",
    "q_derivative",
    "restriction",
    "full_restriction",
    "tilde_laplacian",
    "edge_points",
]

EDGES = ("x", "y", "z")
_EDGE_AXIS = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class EdgeFlags:
    """Which of the edges ``x = 0``, ``y = 0``, ``z = 0`` a ``Q`` family respects."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        for name in "abc":
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"edge flags must be 0 or 1, got {name}={getattr(self, name)}")

    @classmethod
    def of(cls, f) -> "EdgeFlags":
        return f if isinstance(f, EdgeFlags) else cls(*(int(v) for v in f))

    def astuple(self):
        return (self.a, self.b, self.c)

    def __iter__(self):
        return iter(self.astuple())

    @property
    def count(self) -> int:
        return self.a + self.b + self.c

    def without(self, axis: str) -> "EdgeFlags":
        t = list(self.astuple())
        i = "abc".index(axis)
        if not t[i]:
            raise ValueError(f"flag {axis} is not set in {self.astuple()}")
        t[i] = 0
        return EdgeFlags(*t)

    @property
    def tag(self) -> BasisTag:
        if self.count == 0:
            return BasisTag("P", (0, 0, 0))
        return BasisTag("Q", self.astuple())


@dataclass(frozen=True)
class RestrictionOperator:
    """Map from ``Q`` coefficients to Legendre coefficients of the trace on ``edge``."""

    edge: str
    matrix: BlockBandedMatrix

    def __matmul__(self, v):
        return self.matrix @ v

    def apply(self, coeffs) -> CoefficientVector:
        return CoefficientVector(EDGE, self.matrix.matvec(getattr(coeffs, "values", coeffs)))


def edge_points(edge: str, s):
    """Physical points ``(x, y)`` of the edge parameter ``s``."""
    s = np.asarray(s, dtype=float)
    if edge == "x":
        return np.zeros_like(s), s
    if edge == "y":
        return s, np.zeros_like(s)
    if edge == "z":
        return s, 1 - s
    raise ValueError(f"edge must be one of {EDGES}, got {edge!r}")


# ------------------------------------------------------------- evaluation
def q_basis_values(flags, N: int, x, y) -> np.ndarray:
    """All ``Q_{n,k}`` of degree ``<= N`` at the points; shape ``(dof(N), *x.shape)``.

    Built straight from the defining weighted ``P`` and 1-D expressions.
    """
    f = EdgeFlags.of(flags).astuple()
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    z = 1 - x - y
    if f == (0, 0, 0):
        return forward_recurrence((0, 0, 0), N, x, y)
    out = np.zeros((dof(N),) + x.shape)
    out[0] = 1.0
    if N == 0:
        return out

    def P(p, M):
        if M < 0:
            return np.zeros((0,) + x.shape)
        return forward_recurrence(p, M, x, y)

    def at(n, k):
        return dof(n - 1) + k

    def fill_interior(n, weight, Pv, m_shift, k_shift, k_range):
        # Q_{n,k} = weight * P_{n - m_shift, k - k_shift}
        for k in k_range:
            out[at(n, k)] = weight * Pv[at(n - m_shift, k - k_shift)]

    if f == (1, 0, 0):
        P0, P1 = P((0, 0, 0), N), P((1, 0, 0), N - 1)
        for n in range(1, N + 1):
            fill_interior(n, x, P1, 1, 0, range(n))
            out[at(n, n)] = P0[at(n, n)]
    elif f in ((0, 1, 0), (0, 0, 1)):
        w = y if f == (0, 1, 0) else z
        P1 = P(f, N - 1)
        leg = eval_forward(0.0, 0.0, N, x)
        for n in range(1, N + 1):
            out[at(n, 0)] = leg[n]
            fill_interior(n, w, P1, 1, 1, range(1, n + 1))
    elif f in ((1, 1, 0), (1, 0, 1)):
        w = y if f == (1, 1, 0) else z
        one_edge = (0, 1, 0) if f == (1, 1, 0) else (0, 0, 1)
        Pe, P2 = P(one_edge, N - 1), P(f, N - 2)
        j01 = eval_forward(0.0, 1.0, N - 1, x)
        for n in range(1, N + 1):
            out[at(n, 0)] = x * j01[n - 1]
            fill_interior(n, x * w, P2, 2, 1, range(1, n))
            out[at(n, n)] = w * Pe[at(n - 1, n - 1)]
    elif f == (0, 1, 1):
        P2 = P((0, 1, 1), N - 2)
        j10 = eval_forward(1.0, 0.0, N - 1, x)
        for n in range(1, N + 1):
            out[at(n, 0)] = (1 - x) * j10[n - 1]
            out[at(n, 1)] = (1 - x - 2 * y) * j10[n - 1]
            fill_interior(n, y * z, P2, 2, 2, range(2, n + 1))
    elif f == (1, 1, 1):
        P2, P3 = P((0, 1, 1), N - 2), P((1, 1, 1), N - 3)
        if N >= 1:
            out[at(1, 0)] = 1 - 2 * x
            out[at(1, 1)] = 1 - x - 2 * y
        j11 = eval_forward(1.0, 1.0, max(N - 2, 0), x)
        for n in range(2, N + 1):
            out[at(n, 0)] = x * (1 - x) * j11[n - 2]
            out[at(n, 1)] = x * (1 - x - 2 * y) * j11[n - 2]
            fill_interior(n, x * y * z, P3, 3, 2, range(2, n))
            out[at(n, n)] = y * z * P2[at(n - 2, n - 2)]
    else:  # pragma: no cover - EdgeFlags already restricts the cases
        raise ValueError(f"undefined flag combination {f}")
    return out


def q_eval(flags, coeffs, x, y) -> np.ndarray:
    """Evaluate a ``Q^{flags}`` expansion at the points ``(x, y)``."""
    f = EdgeFlags.of(flags)
    vals = np.asarray(getattr(coeffs, "values", coeffs), dtype=float)
    if f.count == 0:
        return clenshaw((0, 0, 0), vals, x, y)
    N = CoefficientVector(f.tag, vals).degree
    B = q_basis_values(f, N, x, y)
    return np.tensordot(vals, B, axes=(0, 0))


# ------------------------------------------------------------ conversions
class _Terms:
    """Collects ``(col, row_n, row_k, value)`` entries column-mask by column-mask."""

    def __init__(self, N):
        self.n, self.k = mode_indices(N)
        self.nf = self.n.astype(float)
        self.kf = self.k.astype(float)
        self.col = np.arange(self.n.size)
        self.items = []

    def add(self, mask, dn, dk, value):
        # values are computed on all columns; masked-out ones may be inf or nan
        value = np.broadcast_to(np.asarray(value, dtype=float), self.n.shape)
        self.items.append(
            (self.col[mask], self.n[mask] + dn, self.k[mask] + dk, value[mask])
        )


def _one_edge_to_p(t: _Terms, src):
    n, k, nf, kf = t.n, t.k, t.nf, t.kf
    if src == (1, 0, 0):
        top = k == n
        t.add(top, 0, 0, 1.0)
        m = ~top
        t.add(m, 0, 0, (nf - kf) / (2 * nf + 1))
        t.add(m, -1, 0, (nf - kf) / (2 * nf + 1))
        return
    sg = 1.0 if src == (0, 1, 0) else -1.0
    k0 = k == 0
    t.add(k0, 0, 0, (nf + 1) / (2 * nf + 1))
    t.add(k0, -1, 0, -nf / (2 * nf + 1))
    m = k >= 1
    den = 2 * (2 * nf + 1)
    t.add(m, 0, 0, sg * (nf + kf + 1) / den)
    t.add(m, 0, -1, -(nf - kf + 1) / den)
    t.add(m, -1, 0, -sg * (nf - kf) / den)
    t.add(m, -1, -1, (nf + kf) / den)


def _two_edge_to_one(t: _Terms, src, dst):
    n, k, nf, kf = t.n, t.k, t.nf, t.kf
    top = (k == n) & (n >= 1)
    mid = (k >= 1) & (k <= n - 1)
    t.add(n == 0, 0, 0, 1.0)
    if src in ((1, 1, 0), (1, 0, 1)) and dst == (1, 0, 0):
        sg = 1.0 if src == (1, 1, 0) else -1.0
        t.add((k == 0) & (n == 1), 0, 0, 1.0)
        m = (k == 0) & (n >= 2)
        t.add(m, 0, 0, (nf + 1) / (2 * nf))
        t.add(m, -1, 0, -0.5)
        t.add(top, 0, 0, sg * 0.5)
        t.add(top, 0, -1, -0.5)
        t.add(top, -1, -1, 0.5)
        den = 4 * nf
        t.add(mid, 0, 0, sg * (nf + kf + 1) / den)
        t.add(mid, 0, -1, -(nf - kf) / den)
        t.add(mid & (k < n - 1), -1, 0, -sg * (nf - kf) / den)
        t.add(mid, -1, -1, (nf + kf - 1) / den)
    elif (src, dst) in (((1, 1, 0), (0, 1, 0)), ((1, 0, 1), (0, 0, 1))):
        m = (k == 0) & (n >= 1)
        t.add(m, 0, 0, 0.5)
        t.add(m, -1, 0, 0.5)
        t.add(mid, 0, 0, (nf - kf) / (2 * nf))
        t.add(mid, -1, 0, (nf - kf) / (2 * nf))
        t.add(top, 0, 0, 1.0)
    elif src == (0, 1, 1):
        sg = 1.0 if dst == (0, 1, 0) else -1.0
        m = (k == 0) & (n >= 1)
        t.add(m, 0, 0, -0.5)
        t.add(m, -1, 0, 0.5)
        m = (k == 1) & (n >= 1)
        den = 2 * nf
        t.add(m, 0, 0, -sg * 2 * (nf + 1) / den)
        t.add(m, 0, -1, -sg * nf / den)
        t.add(m, -1, 0, sg * 2 * (nf - 1) / den)
        t.add(m, -1, -1, sg * nf / den)
        m = k >= 2
        den = 2 * nf * (2 * kf - 1)
        t.add(m, 0, 0, -sg * (kf - 1) * (nf + kf) / den)
        t.add(m, 0, -1, -(kf - 1) * (nf - kf + 1) / den)
        t.add(m, -1, 0, sg * (kf - 1) * (nf - kf) / den)
        t.add(m, -1, -1, (kf - 1) * (nf + kf - 1) / den)
    else:
        raise ValueError(f"illegal conversion step {src} -> {dst}")


def _three_edge_to_two(t: _Terms, dst):
    n, k, nf, kf = t.n, t.k, t.nf, t.kf
    t.add(n == 0, 0, 0, 1.0)
    n1 = n == 1
    big = n >= 2
    if dst == (0, 1, 1):
        t.add(n1 & (k == 0), 0, 0, 2.0)
        t.add(n1 & (k == 0), -1, 0, -1.0)
        t.add(n1 & (k == 1), 0, 0, 1.0)
        m = big & (k == 0)
        t.add(m, 0, 0, (nf - 1) / (2 * nf - 1))
        t.add(m, -1, 0, (nf - 1) / (2 * nf - 1))
        m = big & (k >= 1) & (k <= n - 1)
        t.add(m, 0, 0, (nf - kf) / (2 * nf - 1))
        t.add(m, -1, 0, (nf - kf) / (2 * nf - 1))
        t.add(big & (k == n), 0, 0, 1.0)
        return
    if dst not in ((1, 0, 1), (1, 1, 0)):
        raise ValueError(f"illegal conversion step (1, 1, 1) -> {dst}")
    # the (1,1,0) relations are the (1,0,1) ones with y and z swapped
    sg = 1.0 if dst == (1, 0, 1) else -1.0
    t.add(n1 & (k == 0), 0, 0, -2.0)
    t.add(n1 & (k == 0), -1, 0, 1.0)
    t.add(n1 & (k == 1), 0, 0, sg * 2.0)
    t.add(n1 & (k == 1), 0, -1, sg * 1.0)
    t.add(n1 & (k == 1), -1, -1, -sg * 1.0)
    m = big & (k == 0)
    t.add(m, 0, 0, -(nf - 1) / (2 * nf - 1))
    t.add(m, -1, 0, (nf - 1) / (2 * nf - 1))
    m = big & (k == 1)
    den = 2 * nf - 1
    t.add(m, 0, 0, sg * 2 * (nf + 1) / den)
    t.add(m, 0, -1, sg * (nf - 1) / den)
    t.add(m & (n > 2), -1, 0, -sg * 2 * (nf - 1) / den)
    t.add(m, -1, -1, -sg * (nf - 1) / den)
    m = big & (k >= 2) & (k <= n - 1)
    den = (2 * nf - 1) * (2 * kf - 1)
    t.add(m, 0, 0, sg * (nf + kf) * (kf - 1) / den)
    t.add(m, 0, -1, -(nf - kf) * (kf - 1) / den)
    t.add(m & (k < n - 1), -1, 0, -sg * (nf - kf) * (kf - 1) / den)
    t.add(m, -1, -1, (nf + kf - 2) * (kf - 1) / den)
    m = big & (k == n)
    w = (nf - 1) / (2 * nf - 1)
    t.add(m, 0, 0, sg * w)
    t.add(m, 0, -1, -w)
    t.add(m, -1, -1, w)


@lru_cache(maxsize=256)
def _step(src: tuple, dst: tuple, N: int) -> BlockBandedMatrix:
    t = _Terms(N)
    with np.errstate(divide="ignore", invalid="ignore"):
        _fill_step(t, src, dst)
    return assemble(t.items, N, N, None, EdgeFlags(*src).tag, EdgeFlags(*dst).tag)


def _fill_step(t: _Terms, src, dst):
    if sum(src) == 1 and dst == (0, 0, 0):
        _one_edge_to_p(t, src)
    elif sum(src) == 2 and sum(dst) == 1:
        _two_edge_to_one(t, src, dst)
    elif src == (1, 1, 1) and sum(dst) == 2:
        _three_edge_to_two(t, dst)
    else:
        raise ValueError(f"illegal conversion step {src} -> {dst}")


def q_conversion(src_flags, dst_flags, N: int, order: str = "cba") -> BlockBandedMatrix:
    """``S~_{src}^{dst}`` on degree ``<= N``.

    ``dst`` must be reachable by dropping flags of ``src``.  Multi-step
    conversions drop flags in ``order`` (any order gives the same matrix).
    """
    src, dst = EdgeFlags.of(src_flags), EdgeFlags.of(dst_flags)
    if any(d > s for s, d in zip(src, dst)):
        raise ValueError(f"cannot convert {src.astuple()} to {dst.astuple()}: flags can only be dropped")
    out = None
    cur = src
    for axis in order:
        i = "abc".index(axis)
        if cur.astuple()[i] and not dst.astuple()[i]:
            nxt = cur.without(axis)
            op = _step(cur.astuple(), nxt.astuple(), int(N))
            out = op if out is None else op @ out
            cur = nxt
    if cur != dst:
        raise ValueError(f"order {order!r} does not reach {dst.astuple()}")
    if out is None:
        return BlockBandedMatrix.identity(degree_sizes(N), src.tag)
    return out


# ------------------------------------------------------------ derivatives
_DERIVATIVES = {((0, 1, 1), "y"), ((1, 0, 1), "x"), ((1, 1, 0), "z")}


@lru_cache(maxsize=64)
def _derivative(src: tuple, direction: str, N: int) -> BlockBandedMatrix:
    t = _Terms(N)
    n, k, nf, kf = t.n, t.k, t.nf, t.kf
    pos = n >= 1
    if direction == "y":
        t.add(pos & (k == 1), -1, -1, -2.0)
        t.add(k >= 2, -1, -1, 1 - kf)
    else:
        sg = 1.0 if direction == "x" else -1.0
        mid = (k >= 1) & (k <= n - 1)
        t.add(pos & (k == 0), -1, 0, sg * nf)
        t.add(mid, -1, -1, sg * (kf - nf) / 2)
        t.add(mid, -1, 0, (kf - nf) / 2)
        t.add(pos & (k == n), -1, -1, -sg * nf)
    return assemble(t.items, N - 1, N, None, EdgeFlags(*src).tag, BasisTag("P", (0, 0, 0)))


def q_derivative(src_flags, direction: str, N: int) -> BlockBandedMatrix:
    """``D~``: derivative of a two-edge ``Q`` expansion, landing in ``P^{(0,0,0)}``.

    Supported pairs are ``d/dy`` on ``(0,1,1)``, ``d/dx`` on ``(1,0,1)`` and
    ``d/dz = d/dy - d/dx`` on ``(1,1,0)``.  Rows reach degree ``N - 1``.
    """
    src = EdgeFlags.of(src_flags).astuple()
    if (src, direction) not in _DERIVATIVES:
        raise ValueError(f"no sparse d/d{direction} for Q{src}")
    if N < 1:
        raise ValueError("derivative needs N >= 1")
    return _derivative(src, direction, int(N))


# ------------------------------------------------------------ restriction
_SINGLE = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}


@lru_cache(maxsize=64)
def _select(edge: str, N: int) -> BlockBandedMatrix:
    n = np.arange(N + 1)
    cols = n * (n + 1) // 2 + (n if edge == "x" else 0)
    data = sp.csr_matrix((np.ones(N + 1), (n, cols)), shape=(N + 1, dof(N)))
    return BlockBandedMatrix(
        data, np.ones(N + 1, dtype=int), degree_sizes(N),
        source=EdgeFlags(*_SINGLE[edge]).tag, target=EDGE, check=False,
    )


def restriction(edge: str, src_flags, N: int) -> RestrictionOperator:
    """``R_edge`` composed with the conversion from ``src_flags`` to the one-edge family."""
    if edge not in _SINGLE:
        raise ValueError(f"edge must be one of {EDGES}, got {edge!r}")
    src = EdgeFlags.of(src_flags)
    if not src.astuple()[_EDGE_AXIS[edge]]:
        raise ValueError(f"Q{src.astuple()} does not carry the {edge} = 0 edge flag")
    sel = _select(edge, int(N))
    conv = q_conversion(src, _SINGLE[edge], N)
    return RestrictionOperator(edge, sel @ conv if src.count > 1 else sel)


def full_restriction(N: int, src_flags=(1, 1, 1)) -> BlockBandedMatrix:
    """Stack ``R_x``, ``R_y`` and ``R_z`` (in that order) of a three-edge expansion.

    Rows are the ``N + 1`` Legendre coefficients of each edge trace.
    """
    ops = [restriction(e, src_flags, N).matrix for e in EDGES]
    data = sp.vstack([o.data for o in ops], format="csr")
    return BlockBandedMatrix(
        data, np.ones(3 * (N + 1), dtype=int), degree_sizes(N),
        source=EdgeFlags.of(src_flags).tag, target=EDGE, check=False,
    )


def tilde_laplacian(N: int) -> BlockBandedMatrix:
    """``Delta`` from ``Q^{(1,1,1)}`` to ``P^{(1,1,1)}``; rows reach ``N - 2``.

    ``d^2/dx^2`` goes through ``Q^{(1,0,1)}`` and ``d^2/dy^2`` through
    ``Q^{(0,1,1)}``, each finished by a ``P`` derivative and one conversion.
    """
    if N < 2:
        raise ValueError("Laplacian needs N >= 2")
    xx = (
        build(OperatorDescriptor("S", (1, 0, 1), "b"), N - 2)
        @ build(OperatorDescriptor("Dx", (0, 0, 0)), N - 1)
        @ q_derivative((1, 0, 1), "x", N)
        @ q_conversion((1, 1, 1), (1, 0, 1), N)
    )
    yy = (
        build(OperatorDescriptor("S", (0, 1, 1), "a"), N - 2)
        @ build(OperatorDescriptor("Dy", (0, 0, 0)), N - 1)
        @ q_derivative((0, 1, 1), "y", N)
        @ q_conversion((1, 1, 1), (0, 1, 1), N)
    )
    return xx + yy
