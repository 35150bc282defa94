"""Block-banded matrices with banded blocks, and the solvers used on them.

Every operator in the package is a :class:`BlockBandedMatrix`.  The
nonzeros live in a CSR payload; the declared *profile* (block bandwidths
``(L, U)`` and sub-bandwidths ``(lam, mu)``) is tracked alongside it and
checked on construction.  Block ``(i, j)`` may be nonzero only when
``-U <= i - j <= L`` and, inside a block, entry ``(r, c)`` only when
``-mu <= r - c <= lam``.  Bandwidths may be negative: a block
super-diagonal operator has ``L = -1, U = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.linalg import lapack

__all__ = [
    "BlockBandedMatrix",
    "BandMatrix",
    "BandLU",
    "SingularMatrixError",
    "RankDeficiencyError",
    "degree_sizes",
    "dof",
    "block_offsets",
    "band_lu_factor",
    "band_lu_solve",
    "least_squares_solve",
    "constrained_least_squares",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when band LU meets a pivot that is zero to working precision."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"singular pivot at index {index}")


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, rank: int, ncols: int):
        self.rank = rank
        self.ncols = ncols
        super().__init__(f"matrix has numerical rank {rank} < {ncols} columns")


def degree_sizes(n: int) -> np.ndarray:
    """Block sizes ``1, 2, ..., n + 1`` of a degree-graded vector of degree ``n``."""
    return np.arange(1, n + 2)


def dof(n: int) -> int:
    """Number of coefficients of a bivariate polynomial of total degree ``n``."""
    return (n + 1) * (n + 2) // 2 if n >= 0 else 0


def block_offsets(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=out[1:])
    return out


def _locate(index, offsets):
    blk = np.searchsorted(offsets, index, side="right") - 1
    return blk, index - offsets[blk]


class BlockBandedMatrix:
    """Block-banded matrix with banded blocks.

    Parameters
    ----------
    data : sparse matrix or ndarray
        Entries, of shape ``(sum(row_sizes), sum(col_sizes))``.
    row_sizes, col_sizes : sequence of int
        Block sizes.  Degree-graded operators use ``1, 2, ..., N + 1``.
    block_bandwidths, sub_bandwidths : (int, int), optional
        Declared profile.  Measured from ``data`` when omitted.
    source, target : optional
        Basis tags of the coefficient spaces the operator maps between.
    check : bool
        Verify that no stored nonzero lies outside the declared profile.
    """

    __array_priority__ = 20

    def __init__(
        self,
        data,
        row_sizes,
        col_sizes,
        block_bandwidths=None,
        sub_bandwidths=None,
        source=None,
        target=None,
        check=True,
    ):
        self.row_sizes = np.asarray(row_sizes, dtype=np.int64)
        self.col_sizes = np.asarray(col_sizes, dtype=np.int64)
        self.row_offsets = block_offsets(self.row_sizes)
        self.col_offsets = block_offsets(self.col_sizes)
        shape = (int(self.row_offsets[-1]), int(self.col_offsets[-1]))
        mat = sp.csr_matrix(data, dtype=float)
        if mat.shape != shape:
            raise ValueError(f"data has shape {mat.shape}, block sizes imply {shape}")
        mat.eliminate_zeros()
        mat.sort_indices()
        self.data = mat
        self.source = source
        self.target = target

        need = check or block_bandwidths is None or sub_bandwidths is None
        measured = self.measured_bandwidths() if need else None
        if block_bandwidths is None:
            block_bandwidths = measured[0] if measured else (0, 0)
        if sub_bandwidths is None:
            sub_bandwidths = measured[1] if measured else (0, 0)
        self.block_bandwidths = tuple(int(v) for v in block_bandwidths)
        self.sub_bandwidths = tuple(int(v) for v in sub_bandwidths)
        if check and measured:
            (bl, bu), (sl, su) = measured
            L, U = self.block_bandwidths
            lam, mu = self.sub_bandwidths
            if bl > L or bu > U or sl > lam or su > mu:
                raise ValueError(
                    f"nonzeros with profile {measured} exceed declared "
                    f"{(self.block_bandwidths, self.sub_bandwidths)}"
                )

    # ------------------------------------------------------------------ basics
    @classmethod
    def identity(cls, sizes, tag=None):
        sizes = np.asarray(sizes)
        n = int(sizes.sum())
        return cls(sp.identity(n, format="csr"), sizes, sizes, (0, 0), (0, 0), tag, tag)

    @classmethod
    def zeros(cls, row_sizes, col_sizes, source=None, target=None):
        shape = (int(np.sum(row_sizes)), int(np.sum(col_sizes)))
        return cls(sp.csr_matrix(shape), row_sizes, col_sizes, (0, 0), (0, 0), source, target)

    @property
    def shape(self):
        return self.data.shape

    @property
    def nnz(self) -> int:
        return int(self.data.nnz)

    @property
    def block_shape(self):
        return len(self.row_sizes), len(self.col_sizes)

    def __repr__(self):
        return (
            f"BlockBandedMatrix(blocks={self.block_shape}, shape={self.shape}, "
            f"block_bandwidths={self.block_bandwidths}, sub_bandwidths={self.sub_bandwidths}, "
            f"nnz={self.nnz})"
        )

    def _in_profile(self, i, j, r, c):
        L, U = self.block_bandwidths
        lam, mu = self.sub_bandwidths
        return (-U <= i - j <= L) and (-mu <= r - c <= lam)

    def __getitem__(self, key):
        """Entry ``A[row, col]`` (global indices) or block ``A[Block(i), Block(j)]``."""
        row, col = key
        if isinstance(row, Block) and isinstance(col, Block):
            return self.block(row.index, col.index)
        i, r = _locate(row, self.row_offsets)
        j, c = _locate(col, self.col_offsets)
        if not self._in_profile(int(i), int(j), int(r), int(c)):
            return 0.0
        return float(self.data[row, col])

    def block(self, i: int, j: int) -> np.ndarray:
        ro, co = self.row_offsets, self.col_offsets
        return self.data[ro[i] : ro[i + 1], co[j] : co[j + 1]].toarray()

    def toarray(self) -> np.ndarray:
        return self.data.toarray()

    def tocsr(self) -> sp.csr_matrix:
        return self.data

    # -------------------------------------------------------------- profiles
    def measured_bandwidths(self):
        """Tightest ``((L, U), (lam, mu))`` containing the stored nonzeros.

        Returns ``None`` for a matrix with no nonzeros.
        """
        coo = self.data.tocoo()
        if coo.nnz == 0:
            return None
        i, r = _locate(coo.row, self.row_offsets)
        j, c = _locate(coo.col, self.col_offsets)
        db = i - j
        ds = r - c
        return (int(db.max()), int(-db.min())), (int(ds.max()), int(-ds.min()))

    def nonzero_coordinates(self) -> np.ndarray:
        """``(row, col)`` pairs of the stored nonzeros, row-major order."""
        coo = self.data.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order]])

    # ------------------------------------------------------------ arithmetic
    def matvec(self, v):
        """Apply to a flat array or to a coefficient vector with a basis tag."""
        values = getattr(v, "values", None)
        if values is None:
            values = np.asarray(v, dtype=float)
            if values.shape[0] != self.shape[1]:
                raise ValueError(f"vector of length {values.shape[0]} for {self.shape} operator")
            return self.data @ values
        from .coefficients import CoefficientVector

        basis = getattr(v, "basis", None)
        if self.source is not None and basis is not None and basis != self.source:
            raise ValueError(f"operator acts on {self.source}, vector is in {basis}")
        values = np.asarray(values, dtype=float)
        if values.shape[0] > self.shape[1]:
            raise ValueError(f"vector of length {values.shape[0]} for {self.shape} operator")
        padded = np.zeros(self.shape[1])
        padded[: values.shape[0]] = values
        return CoefficientVector(self.target if self.target is not None else basis, self.data @ padded)

    def __matmul__(self, other):
        if isinstance(other, BlockBandedMatrix):
            return self.compose(other)
        return self.matvec(other)

    def compose(self, other: "BlockBandedMatrix") -> "BlockBandedMatrix":
        """``self @ other``; bandwidths add componentwise."""
        if not np.array_equal(self.col_sizes, other.row_sizes):
            raise ValueError(
                f"block structures not conformable: {len(self.col_sizes)} column blocks "
                f"against {len(other.row_sizes)} row blocks"
            )
        if self.source is not None and other.target is not None and self.source != other.target:
            raise ValueError(f"composing an operator on {self.source} with one into {other.target}")
        (L1, U1), (l1, u1) = self.block_bandwidths, self.sub_bandwidths
        (L2, U2), (l2, u2) = other.block_bandwidths, other.sub_bandwidths
        return BlockBandedMatrix(
            self.data @ other.data,
            self.row_sizes,
            other.col_sizes,
            (L1 + L2, U1 + U2),
            (l1 + l2, u1 + u2),
            source=other.source,
            target=self.target,
            check=False,
        )

    def _combine(self, other, sign):
        if not (
            np.array_equal(self.row_sizes, other.row_sizes)
            and np.array_equal(self.col_sizes, other.col_sizes)
        ):
            raise ValueError("block structures differ")
        L = max(self.block_bandwidths[0], other.block_bandwidths[0])
        U = max(self.block_bandwidths[1], other.block_bandwidths[1])
        lam = max(self.sub_bandwidths[0], other.sub_bandwidths[0])
        mu = max(self.sub_bandwidths[1], other.sub_bandwidths[1])
        return BlockBandedMatrix(
            self.data + sign * other.data,
            self.row_sizes,
            self.col_sizes,
            (L, U),
            (lam, mu),
            source=self.source if self.source is not None else other.source,
            target=self.target if self.target is not None else other.target,
            check=False,
        )

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar):
        return BlockBandedMatrix(
            self.data * float(scalar),
            self.row_sizes,
            self.col_sizes,
            self.block_bandwidths,
            self.sub_bandwidths,
            self.source,
            self.target,
            check=False,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @property
    def T(self):
        (L, U), (lam, mu) = self.block_bandwidths, self.sub_bandwidths
        return BlockBandedMatrix(
            self.data.T.tocsr(),
            self.col_sizes,
            self.row_sizes,
            (U, L),
            (mu, lam),
            self.target,
            self.source,
            check=False,
        )

    def truncate(self, n_row_blocks: int, n_col_blocks: int) -> "BlockBandedMatrix":
        """Leading ``n_row_blocks x n_col_blocks`` block sub-matrix."""
        if n_row_blocks > len(self.row_sizes) or n_col_blocks > len(self.col_sizes):
            raise ValueError("cannot truncate to more blocks than stored")
        nr = self.row_offsets[n_row_blocks]
        nc = self.col_offsets[n_col_blocks]
        return BlockBandedMatrix(
            self.data[:nr, :nc],
            self.row_sizes[:n_row_blocks],
            self.col_sizes[:n_col_blocks],
            self.block_bandwidths,
            self.sub_bandwidths,
            self.source,
            self.target,
            check=False,
        )

    def pad(self, n_row_blocks: int, n_col_blocks: int) -> "BlockBandedMatrix":
        """Extend with zero degree-graded blocks up to the given block counts."""
        rs = np.concatenate([self.row_sizes, np.arange(len(self.row_sizes), n_row_blocks) + 1])
        cs = np.concatenate([self.col_sizes, np.arange(len(self.col_sizes), n_col_blocks) + 1])
        shape = (int(rs.sum()), int(cs.sum()))
        data = sp.csr_matrix(
            (self.data.data, self.data.indices, np.concatenate(
                [self.data.indptr, np.full(shape[0] - self.shape[0], self.data.indptr[-1])]
            )),
            shape=shape,
        )
        return BlockBandedMatrix(
            data, rs, cs, self.block_bandwidths, self.sub_bandwidths, self.source, self.target, check=False
        )

    # ---------------------------------------------------------------- banding
    def scalar_bandwidths(self):
        """Tight scalar ``(kl, ku)`` implied by the declared profile."""
        L, U = self.block_bandwidths
        lam, mu = self.sub_bandwidths
        kl = ku = 0
        nrb, ncb = self.block_shape
        for i in range(nrb):
            for j in range(max(0, i - L), min(ncb, i + U + 1)):
                lo = max(-mu, -(int(self.col_sizes[j]) - 1))
                hi = min(lam, int(self.row_sizes[i]) - 1)
                if lo > hi:
                    continue
                shift = int(self.row_offsets[i] - self.col_offsets[j])
                kl = max(kl, shift + hi)
                ku = max(ku, -(shift + lo))
        return kl, ku

    def to_band(self) -> "BandMatrix":
        if self.shape[0] != self.shape[1]:
            raise ValueError(f"band form needs a square matrix, got {self.shape}")
        kl, ku = self.scalar_bandwidths()
        n = self.shape[0]
        ab = np.zeros((kl + ku + 1, n))
        coo = self.data.tocoo()
        ab[ku + coo.row - coo.col, coo.col] = coo.data
        return BandMatrix(n, kl, ku, ab)


@dataclass(frozen=True)
class Block:
    """Block index marker for ``A[Block(i), Block(j)]`` reads."""

    index: int


@dataclass(frozen=True)
class BandMatrix:
    """Square banded matrix in LAPACK diagonal-major storage.

    ``ab[ku + i - j, j] == A[i, j]`` for ``-ku <= i - j <= kl``.
    """

    n: int
    kl: int
    ku: int
    ab: np.ndarray

    @classmethod
    def from_dense(cls, A, kl: int, ku: int) -> "BandMatrix":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        ab = np.zeros((kl + ku + 1, n))
        for d in range(-ku, kl + 1):
            j = np.arange(max(0, -d), min(n, n - d))
            ab[ku + d, j] = A[j + d, j]
        return cls(n, kl, ku, ab)

    def __getitem__(self, key):
        i, j = key
        if not (-self.ku <= i - j <= self.kl):
            return 0.0
        return float(self.ab[self.ku + i - j, j])

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for d in range(-self.ku, self.kl + 1):
            j = np.arange(max(0, -d), min(self.n, self.n - d))
            out[j + d, j] = self.ab[self.ku + d, j]
        return out

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = np.zeros(self.n)
        for d in range(-self.ku, self.kl + 1):
            j = np.arange(max(0, -d), min(self.n, self.n - d))
            y[j + d] += self.ab[self.ku + d, j] * x[j]
        return y

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.toarray()).sum(axis=1))) if self.n else 0.0


@dataclass(frozen=True)
class BandLU:
    """LU factors of a :class:`BandMatrix` with partial pivoting."""

    n: int
    kl: int
    ku: int
    lu: np.ndarray
    piv: np.ndarray

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, rhs, self.piv)
        if info != 0:
            raise ValueError(f"dgbtrs failed with info={info}")
        return x


def band_lu_factor(A: BandMatrix, rtol: float | None = None) -> BandLU:
    """Band LU with partial pivoting (LAPACK ``gbtrf``).

    A pivot below ``rtol * max|A|`` counts as singular and raises
    :class:`SingularMatrixError` naming the (0-based) pivot index.
    """
    n, kl, ku = A.n, A.kl, A.ku
    if n == 0:
        return BandLU(0, kl, ku, np.zeros((2 * kl + ku + 1, 0)), np.zeros(0, dtype=np.int32))
    work = np.zeros((2 * kl + ku + 1, n))
    work[kl:, :] = A.ab
    lu, piv, info = lapack.dgbtrf(work, kl, ku)
    if info > 0:
        raise SingularMatrixError(info - 1)
    if info < 0:
        raise ValueError(f"dgbtrf rejected argument {-info}")
    if rtol is None:
        rtol = n * np.finfo(float).eps
    scale = np.max(np.abs(A.ab))
    diag = np.abs(lu[kl + ku, :])
    bad = np.flatnonzero(diag <= rtol * scale)
    if bad.size:
        raise SingularMatrixError(int(bad[0]), f"pivot {bad[0]} is zero to working precision")
    return BandLU(n, kl, ku, lu, piv)


def band_lu_solve(A: BandMatrix, rhs) -> np.ndarray:
    return band_lu_factor(A).solve(rhs)


def _as_dense(A) -> np.ndarray:
    if isinstance(A, BlockBandedMatrix):
        return A.toarray()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def least_squares_solve(A, rhs, rtol: float | None = None) -> np.ndarray:
    """Minimize ``||A x - rhs||_2`` by dense column-pivoted Householder QR.

    Raises :class:`RankDeficiencyError` when a diagonal entry of ``R`` falls
    below ``rtol * |R[0, 0]|``.
    """
    A = _as_dense(A)
    rhs = np.asarray(rhs, dtype=float)
    m, n = A.shape
    if m < n:
        raise ValueError(f"least squares needs rows >= cols, got {A.shape}")
    if n == 0:
        return np.zeros(0)
    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if rtol is None:
        rtol = max(m, n) * np.finfo(float).eps
    rank = int(np.sum(d > rtol * d[0])) if d[0] > 0 else 0
    if rank < n:
        raise RankDeficiencyError(rank, n)
    y = scipy.linalg.solve_triangular(R, Q.T @ rhs)
    x = np.empty(n)
    x[perm] = y
    return x


def constrained_least_squares(A, b, C, d, rtol: float | None = None) -> np.ndarray:
    """Minimize ``||A x - b||`` subject to ``C x = d`` (null-space method).

    The constraints may be redundant (for instance continuity imposed at a
    vertex shared by several edges); their rank is read off a pivoted QR of
    ``C^T``, and the minimum-norm particular solution is used.
    """
    A = _as_dense(A)
    C = _as_dense(C)
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    n = A.shape[1]
    if rtol is None:
        rtol = max(C.shape) * np.finfo(float).eps * 10
    Q, R, perm = scipy.linalg.qr(C.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(R))
    r = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    # C^T P = Q R  =>  C = P R^T Q^T; restrict to the leading r independent rows.
    Y, Z = Q[:, :r], Q[:, r:]
    R1 = R[:r, :r]
    rows = perm[:r]
    x_p = Y @ scipy.linalg.solve_triangular(R1.T, d[rows], lower=True)
    if Z.shape[1] == 0:
        return x_p
    y = least_squares_solve(A @ Z, b - A @ x_p)
    return x_p + Z @ y
