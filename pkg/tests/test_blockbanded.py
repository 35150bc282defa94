import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from numpy.testing import assert_allclose

from trispectral.blockbanded import (
    BandMatrix,
    Block,
    BlockBandedMatrix,
    RankDeficiencyError,
    SingularMatrixError,
    band_lu_factor,
    band_lu_solve,
    degree_sizes,
    dof,
    least_squares_solve,
)
from trispectral.coefficients import BasisTag, CoefficientVector
from trispectral.triops import conversion, laplacian_strong, laplacian_weighted, lowering


def random_block_banded(rng, nblocks, bw, sbw, rows=None):
    rows = degree_sizes(nblocks - 1) if rows is None else rows
    cols = degree_sizes(nblocks - 1)
    A = np.zeros((rows.sum(), cols.sum()))
    ro, co = np.r_[0, np.cumsum(rows)], np.r_[0, np.cumsum(cols)]
    for i in range(len(rows)):
        for j in range(len(cols)):
            if -bw[1] <= i - j <= bw[0]:
                for r in range(rows[i]):
                    for c in range(cols[j]):
                        if -sbw[1] <= r - c <= sbw[0]:
                            A[ro[i] + r, co[j] + c] = rng.standard_normal()
    return BlockBandedMatrix(A, rows, cols, bw, sbw)


def test_dof_and_sizes():
    assert dof(0) == 1 and dof(3) == 10
    assert list(degree_sizes(3)) == [1, 2, 3, 4]


def test_reads_outside_profile_are_zero():
    A = random_block_banded(np.random.default_rng(0), 4, (1, 0), (0, 0))
    assert A[Block(0), Block(2)].shape == (1, 3)
    assert not A[Block(0), Block(2)].any()
    assert A[0, 5] == 0.0


def test_declared_profile_is_enforced():
    with pytest.raises(ValueError):
        BlockBandedMatrix(np.ones((3, 3)), [1, 2], [1, 2], (0, 0), (0, 0))


def test_matvec_identity_zero_and_dense():
    rng = np.random.default_rng(1)
    sizes = degree_sizes(2)
    v = rng.standard_normal(6)
    assert_allclose(BlockBandedMatrix.identity(sizes).matvec(v), v, rtol=0, atol=0)
    assert not BlockBandedMatrix.zeros(sizes, sizes).matvec(v).any()
    A = random_block_banded(rng, 3, (1, 1), (1, 1))
    assert_allclose(A.matvec(v), A.toarray() @ v, atol=1e-15)


def test_matvec_with_coefficient_vector_checks_basis():
    S = conversion((0, 0, 0), "a", 3)
    v = CoefficientVector(BasisTag("P", (0, 0, 0)), np.arange(10.0))
    out = S.matvec(v)
    assert out.basis == BasisTag("P", (1, 0, 0))
    with pytest.raises(ValueError):
        S.matvec(CoefficientVector(BasisTag("P", (1, 0, 0)), np.arange(10.0)))


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        BlockBandedMatrix.identity(degree_sizes(2)).matvec(np.ones(4))


def test_compose_bandwidth_arithmetic_and_entries():
    rng = np.random.default_rng(2)
    A = random_block_banded(rng, 5, (1, 0), (1, 0))
    B = random_block_banded(rng, 5, (0, 1), (0, 1))
    C = A @ B
    assert_allclose(C.toarray(), A.toarray() @ B.toarray(), atol=1e-14)
    assert C.block_bandwidths == (1, 1) and C.sub_bandwidths == (1, 1)
    I = BlockBandedMatrix.identity(degree_sizes(4))
    assert_allclose((A @ I).toarray(), A.toarray(), rtol=0, atol=0)


def test_upper_times_lower_bidiagonal_gives_tridiagonal_blocks():
    S = conversion((0, 0, 0), "b", 6)
    L = lowering((0, 1, 0), "b", 6)
    J = (L @ S).truncate(7, 7)
    (bl, bu), (sl, su) = J.measured_bandwidths()
    assert (bl, bu) == (1, 1)
    assert (sl, su) == (1, 1)


def test_compose_dimension_mismatch():
    A = BlockBandedMatrix.identity(degree_sizes(2))
    B = BlockBandedMatrix.identity(degree_sizes(3))
    with pytest.raises(ValueError):
        A @ B


def test_to_band_roundtrip_laplacian():
    A = laplacian_weighted(10).truncate(11, 11)
    band = A.to_band()
    assert_allclose(band.toarray(), A.toarray(), rtol=0, atol=0)
    coo = A.tocsr().tocoo()
    assert coo.nnz > 0
    for r, c, v in zip(coo.row[::37], coo.col[::37], coo.data[::37]):
        assert band[r, c] == v


def test_to_band_diagonal_and_tiny():
    D = BlockBandedMatrix(sp.diags(np.arange(1.0, 7.0)), degree_sizes(2), degree_sizes(2))
    b = D.to_band()
    assert (b.kl, b.ku) == (0, 0)
    T = BlockBandedMatrix(np.array([[2.0, 1.0], [0.0, 3.0]]), [1, 1], [1, 1])
    assert_allclose(T.to_band().toarray(), [[2, 1], [0, 3]])


def test_band_lu_examples():
    I = BandMatrix.from_dense(np.eye(4), 0, 0)
    assert_allclose(band_lu_solve(I, np.arange(4.0)), np.arange(4.0))
    A = BandMatrix.from_dense([[2.0, 1.0], [0.0, 3.0]], 0, 1)
    assert_allclose(band_lu_solve(A, [5.0, 6.0]), [1.5, 2.0], atol=1e-15)


def test_band_lu_poisson_vs_dense():
    A = laplacian_weighted(20).truncate(21, 21)
    rhs = np.random.default_rng(3).standard_normal(A.shape[0])
    x = band_lu_factor(A.to_band()).solve(rhs)
    assert_allclose(x, scipy.linalg.solve(A.toarray(), rhs), rtol=1e-10, atol=1e-12)
    Ad = A.toarray()
    assert np.linalg.norm(Ad @ x - rhs) <= 1e-10 * (np.linalg.norm(Ad) * np.linalg.norm(x) + np.linalg.norm(rhs))


def test_band_lu_singular_reports_pivot():
    A = BandMatrix.from_dense(np.diag([1.0, 0.0, 2.0]), 0, 0)
    with pytest.raises(SingularMatrixError) as info:
        band_lu_factor(A)
    assert info.value.index == 1


def test_least_squares_examples():
    assert_allclose(least_squares_solve(np.array([[1.0], [1.0]]), [1.0, 3.0]), [2.0], atol=1e-15)
    A = laplacian_weighted(6).truncate(7, 7)
    rhs = np.arange(A.shape[0], dtype=float)
    assert_allclose(least_squares_solve(A, rhs), band_lu_solve(A.to_band(), rhs), rtol=1e-10, atol=1e-12)


def test_least_squares_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        least_squares_solve(np.array([[1.0, 1.0], [2.0, 2.0], [0.0, 0.0]]), [1.0, 2.0, 0.0])


@pytest.mark.parametrize("op", [laplacian_strong, laplacian_weighted])
def test_nnz_linear_in_unknowns(op):
    nnz = {N: op(N).nnz for N in (20, 40, 80)}
    # marginal nnz per added unknown, so the truncated first blocks do not count
    early = (nnz[40] - nnz[20]) / (dof(40) - dof(20))
    late = (nnz[80] - nnz[40]) / (dof(80) - dof(40))
    assert late <= 1.1 * early
    assert nnz[80] / dof(80) <= 15
