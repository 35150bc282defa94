"""Evaluation of triangle expansions and construction of multiplication operators.

The vector ``P_n`` of degree-``n`` basis polynomials satisfies

    x P_n = A_n^x P_n + B_n^x P_{n+1} + C_{n-1}^x P_{n-1}

and likewise for ``y``.  Stacking the two gives a full-column-rank system for
``P_{n+1}``; with the sparse left inverse ``B_n^+`` this becomes

    P_{n+1} = G_n P_n - H_n P_{n-1},
    G_n = B_n^+ [x - A_n^x; y - A_n^y],   H_n = B_n^+ [C_{n-1}^x; C_{n-1}^y].

Forward substitution through this lower block-triangular system gives all
``P_{n,k}``; back substitution on its transpose is Clenshaw's algorithm.
Replacing ``x, y`` by the Jacobi operators turns Clenshaw into a
construction of the multiplication operator ``M_q``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .blockbanded import BlockBandedMatrix, degree_sizes, dof
from .coefficients import BasisTag, CoefficientVector
from .triops import ParameterTriple, jacobi_transposes

__all__ = [
    "RecurrenceBlocks",
    "PseudoInverse",
    "recurrence_blocks",
    "pseudo_inverse",
    "eval_point",
    "clenshaw",
    "forward_recurrence",
    "multiplication_operator",
    "evaluate",
]


@dataclass(frozen=True)
class RecurrenceBlocks:
    """Blocks of the multiplication relations at degree ``n``.

    ``x P_n = A^x P_n + B^x P_{n+1} + C^x_{prev} P_{n-1}`` where the stored
    ``C^x`` is the coefficient block of ``P_n`` in ``x P_{n+1}``.
    """

    n: int
    Ax: np.ndarray
    Ay: np.ndarray
    Bx: np.ndarray
    By: np.ndarray
    Cx: np.ndarray
    Cy: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return np.vstack([self.Bx, self.By])


@dataclass(frozen=True)
class PseudoInverse:
    """Sparse left inverse of ``B_n = [B_n^x; B_n^y]``.

    The first ``n + 1`` rows invert the diagonal part of ``B_n^x``; the last
    row is ``[b1, 0, ..., 0, 1/b2]`` where ``b2 = B_n^y[n, n+1]`` and
    ``b1 = -B_n^y[n, :n+1] / diag(B_n^x) / b2`` (only two entries are nonzero
    because ``B_n^y`` is tridiagonal).
    """

    B1_inverse: np.ndarray
    b1: np.ndarray
    b2_inverse: float

    @property
    def n(self) -> int:
        return self.B1_inverse.size - 1

    def toarray(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n + 2, 2 * n + 2))
        out[np.arange(n + 1), np.arange(n + 1)] = self.B1_inverse
        out[n + 1, : n + 1] = self.b1
        out[n + 1, 2 * n + 1] = self.b2_inverse
        return out

    def apply(self, rx, ry) -> np.ndarray:
        """``B_n^+ [rx; ry]`` in ``O(n)``; trailing axes are carried along."""
        rx = np.asarray(rx, dtype=float)
        ry = np.asarray(ry, dtype=float)
        inv = self.B1_inverse.reshape((-1,) + (1,) * (rx.ndim - 1))
        head = rx * inv
        last = np.tensordot(self.b1, rx, axes=(0, 0)) + self.b2_inverse * ry[-1]
        return np.concatenate([head, last[None]], axis=0)


def _block(m: sp.csr_matrix, i: int, j: int) -> np.ndarray:
    ri, rj = dof(i - 1), dof(j - 1)
    return m[ri : ri + i + 1, rj : rj + j + 1].toarray()


def recurrence_blocks(p, n: int) -> RecurrenceBlocks:
    """Blocks at degree ``n`` read off the transposed Jacobi operators."""
    jxt, jyt = jacobi_transposes(p, n + 1)
    mx, my = jxt.tocsr(), jyt.tocsr()
    return RecurrenceBlocks(
        n=n,
        Ax=_block(mx, n, n).T,
        Ay=_block(my, n, n).T,
        Bx=_block(mx, n + 1, n).T,
        By=_block(my, n + 1, n).T,
        Cx=_block(mx, n, n + 1).T,
        Cy=_block(my, n, n + 1).T,
    )


def _pinv_parts(bx_diag: np.ndarray, by_last_row: np.ndarray, b2: float) -> PseudoInverse:
    if np.any(bx_diag == 0) or b2 == 0:
        raise ValueError("B_n has a zero pivot; the parameter regime is invalid")
    b1 = -by_last_row / bx_diag / b2
    return PseudoInverse(B1_inverse=1.0 / bx_diag, b1=b1, b2_inverse=1.0 / b2)


def pseudo_inverse(blocks: RecurrenceBlocks) -> PseudoInverse:
    n = blocks.n
    bx = blocks.Bx
    diag = np.diag(bx[:, : n + 1]).copy()
    return _pinv_parts(diag, blocks.By[n, : n + 1], float(blocks.By[n, n + 1]))


@dataclass(frozen=True)
class _Stage:
    """Sparse pieces of ``G_n`` and ``H_n`` for one degree."""

    pinv: PseudoInverse
    gammaT: sp.csr_matrix  # (B^+ [A^x; A^y])^T, shape (n+1, n+2)
    hT: sp.csr_matrix | None  # (B^+ [C^x_{n-1}; C^y_{n-1}])^T, shape (n, n+2)


@lru_cache(maxsize=32)
def _stages(p: tuple, N: int) -> tuple:
    """Recurrence stages ``0..N-1`` for the basis ``P^p``."""
    if N < 1:
        return ()
    jxt, jyt = jacobi_transposes(p, N)
    mx, my = jxt.tocsr(), jyt.tocsr()
    stages = []
    for n in range(N):
        r0, r1, r2 = dof(n - 1), dof(n), dof(n + 1)
        c0 = dof(n - 2)
        bxT = mx[r1:r2, r0:r1]  # (n+2, n+1): B^x transposed
        byT = my[r1:r2, r0:r1]
        bx_diag = bxT.diagonal()
        by_row = byT[:, n].toarray().ravel()  # B^y[n, :]
        pinv = _pinv_parts(bx_diag, by_row[: n + 1], float(by_row[n + 1]))
        P = sp.csr_matrix(pinv.toarray())  # (n+2, 2n+2), n + 3 nonzeros
        axT, ayT = mx[r0:r1, r0:r1], my[r0:r1, r0:r1]
        gamma = P @ sp.vstack([axT.T, ayT.T])
        hT = None
        if n >= 1:
            cxT, cyT = mx[c0:r0, r0:r1], my[c0:r0, r0:r1]  # (n, n+1) = C_{n-1}^T
            h = P @ sp.vstack([cxT.T, cyT.T])
            hT = sp.csr_matrix(h.T)
        stages.append(_Stage(pinv, sp.csr_matrix(gamma.T), hT))
    return tuple(stages)


def _UT(pinv: PseudoInverse, v):
    """``B^+[:, :n+1]^T v``."""
    inv = pinv.B1_inverse.reshape((-1,) + (1,) * (v.ndim - 1))
    return v[:-1] * inv + np.multiply.outer(pinv.b1, v[-1])


def _VT(pinv: PseudoInverse, v):
    """``B^+[:, n+1:]^T v``: only the last entry of the last row is nonzero."""
    out = np.zeros((v.shape[0] - 1,) + v.shape[1:])
    out[-1] = pinv.b2_inverse * v[-1]
    return out


def _check_domain(x, y):
    tol = 1e-14
    if np.any(x < -tol) or np.any(y < -tol) or np.any(x + y > 1 + tol):
        warnings.warn("evaluating outside the closed unit triangle", RuntimeWarning, stacklevel=3)


def _coeff_values(coeffs) -> np.ndarray:
    vals = np.asarray(getattr(coeffs, "values", coeffs), dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("empty coefficient vector")
    return vals


def clenshaw(p, coeffs, x, y) -> np.ndarray:
    """Evaluate ``sum f_{n,k} P_{n,k}^{p}`` at arrays of points.

    Cost is ``O(N^2)`` per point; points are processed together.
    """
    p = ParameterTriple.of(p).astuple()
    vals = _coeff_values(coeffs)
    N = CoefficientVector(BasisTag("P", p), vals).degree
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    xf = np.broadcast_to(x, shape).ravel()
    yf = np.broadcast_to(y, shape).ravel()
    _check_domain(xf, yf)
    stages = _stages(p, N)
    blocks = [vals[dof(n - 1) : dof(n)] for n in range(N + 1)]
    v1 = None  # v_{n+1}
    v2 = None  # v_{n+2}
    for n in range(N, -1, -1):
        v = np.repeat(blocks[n][:, None], xf.size, axis=1)
        if v1 is not None:
            st = stages[n]
            v += xf * _UT(st.pinv, v1) + yf * _VT(st.pinv, v1) - st.gammaT @ v1
        if v2 is not None:
            v -= stages[n + 1].hT @ v2
        v2, v1 = v1, v
    out = v1[0].reshape(shape)
    return out if shape else float(out)


def eval_point(p, coeffs, x: float, y: float) -> float:
    """Value of a ``P^{p}`` expansion at a single point."""
    return float(clenshaw(p, coeffs, float(x), float(y)))


def forward_recurrence(p, N: int, x, y) -> np.ndarray:
    """All ``P_{n,k}^{p}(x, y)`` for ``n <= N``, shape ``(dof(N),) + shape``."""
    p = ParameterTriple.of(p).astuple()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast(x, y).shape
    xf = np.broadcast_to(x, shape).ravel()
    yf = np.broadcast_to(y, shape).ravel()
    _check_domain(xf, yf)
    stages = _stages(p, N)
    out = np.empty((dof(N), xf.size))
    out[0] = 1.0
    prev = None
    cur = out[0:1]
    for n in range(N):
        st = stages[n]
        # G_n P_n = B^+ [x P_n - A^x P_n; y P_n - A^y P_n]
        nxt = st.pinv.apply(xf * cur, yf * cur) - st.gammaT.T @ cur
        if prev is not None:
            nxt -= st.hT.T @ prev
        out[dof(n) : dof(n + 1)] = nxt
        prev, cur = cur, nxt
    return out.reshape((dof(N),) + shape)


# ------------------------------------------------- multiplication operators
def multiplication_operator(q_coeffs: CoefficientVector, p, N: int) -> BlockBandedMatrix:
    """``M_q`` acting on ``P^{p}`` coefficients of degree ``<= N``.

    ``q_coeffs`` is an expansion in some ``P`` basis of degree ``d``.  The
    recurrence of that basis is run with ``x, y`` replaced by the transposed
    Jacobi operators of ``P^{p}``, truncated at degree ``N + d``.  Every
    column of degree ``<= N`` is then exact, and the result has rows up to
    degree ``N + d``.
    """
    if q_coeffs.basis.family != "P":
        raise ValueError(f"multiplier must be a P expansion, got {q_coeffs.basis}")
    p = ParameterTriple.of(p)
    qp = q_coeffs.basis.params
    q = q_coeffs.trim()
    d = q.degree
    M = N + d
    size = dof(M)
    rows, cols = degree_sizes(M), degree_sizes(N)
    if d == 0:
        data = sp.identity(size, format="csr")[:, : dof(N)] * float(q.values[0])
        return BlockBandedMatrix(data, rows, cols, (0, 0), (0, 0), p.tag, p.tag, check=False)

    jxt, jyt = jacobi_transposes(p, M)
    X = jxt.tocsr()[:size, :size]
    Y = jyt.tocsr()[:size, :size]
    eye = sp.identity(size, format="csr")
    stages = _stages(tuple(qp), d)
    blocks = [q.values[dof(n - 1) : dof(n)] for n in range(d + 1)]

    def combine(weights: np.ndarray, ops: list):
        """``sum_i weights[i] * ops[i]``, skipping zeros."""
        acc = None
        for w, op in zip(weights, ops):
            if w != 0:
                acc = op * w if acc is None else acc + op * w
        return acc

    v1 = v2 = None
    for n in range(d, -1, -1):
        v = [eye * float(c) for c in blocks[n]]
        if v1 is not None:
            st = stages[n]
            pinv = st.pinv
            # U^T v: diagonal part plus the b1 row; V^T v touches only entry n
            for j in range(n + 1):
                ux = v1[j] * pinv.B1_inverse[j]
                if pinv.b1[j] != 0:
                    ux = ux + v1[n + 1] * pinv.b1[j]
                term = X @ ux
                if j == n:
                    term = term + Y @ (v1[n + 1] * pinv.b2_inverse)
                g = combine(st.gammaT.getrow(j).toarray().ravel(), v1)
                if g is not None:
                    term = term - g
                v[j] = v[j] + term
        if v2 is not None:
            hT = stages[n + 1].hT
            for j in range(n + 1):
                h = combine(hT.getrow(j).toarray().ravel(), v2)
                if h is not None:
                    v[j] = v[j] - h
        v2, v1 = v1, v
    data = sp.csr_matrix(v1[0][:, : dof(N)])
    data.eliminate_zeros()
    return BlockBandedMatrix(data, rows, cols, (d, d), (d, d), p.tag, p.tag, check=False)


# ---------------------------------------------------------- dispatcher
def evaluate(coeffs: CoefficientVector, x, y=None) -> np.ndarray:
    """Evaluate any basis-tagged coefficient vector.

    Weighted bases include their weight ``x^a y^b z^c``.  Edge expansions
    take a single parameter array ``x`` on ``[0, 1]``.
    """
    fam = coeffs.basis.family
    if fam == "legendre-edge":
        from .jacobi1d import eval_clenshaw_1d

        return eval_clenshaw_1d(0.0, 0.0, coeffs.values, x)
    if y is None:
        raise ValueError("triangle expansions need both x and y")
    a, b, c = coeffs.basis.params
    if fam == "P":
        return clenshaw((a, b, c), coeffs, x, y)
    if fam == "weightedP":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = x**a * y**b * (1 - x - y) ** c
        return w * clenshaw((a, b, c), coeffs, x, y)
    if fam == "Q":
        from .dirichlet import q_eval

        return q_eval((a, b, c), coeffs, x, y)
    raise ValueError(f"cannot evaluate basis {coeffs.basis}")
