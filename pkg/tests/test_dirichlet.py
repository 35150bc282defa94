import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import (
    P_all,
    Q,
    Q_DERIVATIVES,
    Q_STEPS,
    Q_all,
    Pt,
    interior_points,
    project,
    q_conversion_error,
    q_derivative_error,
)
from trispectral.blockbanded import dof
from trispectral.dirichlet import (
    EdgeFlags,
    edge_points,
    full_restriction,
    q_basis_values,
    q_conversion,
    q_derivative,
    q_eval,
    restriction,
    tilde_laplacian,
)
from trispectral.evaluate import clenshaw
from trispectral.transform import legendre_edge_synthesis

FAMILIES = [f for f in itertools.product((0, 1), repeat=3) if any(f)]
X, Y = interior_points(30, seed=41)


def unit(N, n=0, k=0):
    e = np.zeros(dof(N))
    e[dof(n - 1) + k] = 1.0
    return e


# -------------------------------------------------------------- evaluation
def test_edge_flags_validation():
    with pytest.raises(ValueError):
        EdgeFlags(2, 0, 0)
    with pytest.raises(ValueError):
        EdgeFlags(0, 1, 0).without("a")
    assert EdgeFlags(1, 1, 0).count == 2


@pytest.mark.parametrize("fl", FAMILIES)
def test_q_constant_first_function(fl):
    assert_allclose(q_eval(fl, [1.0], X, Y), np.ones_like(X), atol=0)


def test_q111_example():
    assert_allclose(q_eval((1, 1, 1), unit(1, 1, 1), 0.2, 0.3), 0.2, atol=1e-15)


@pytest.mark.parametrize("fl", FAMILIES)
def test_q_basis_matches_oracle(fl):
    got = q_basis_values(fl, 10, X, Y)
    assert_allclose(got, Q_all(fl, 10, X, Y), atol=1e-12)


def test_q100_on_x_edge():
    rng = np.random.default_rng(42)
    y = rng.uniform(0, 1, 20)
    x = np.zeros_like(y)
    for n in range(9):
        for k in range(n):
            assert np.abs(q_eval((1, 0, 0), unit(n, n, k), x, y)).max() < 1e-13
        assert_allclose(q_eval((1, 0, 0), unit(n, n, n), x, y), Pt(n, 0, 0, y), atol=1e-13)


# ------------------------------------------------------------ conversions
@pytest.mark.parametrize("src,dst", Q_STEPS)
def test_single_step_conversions(src, dst):
    op = q_conversion(src, dst, 10)
    assert q_conversion_error(src, dst, op, X, Y) <= 1e-12


def test_conversion_examples():
    assert q_conversion((1, 0, 0), (0, 0, 0), 3)[0, 0] == 1.0
    S = q_conversion((1, 0, 0), (0, 0, 0), 6).toarray()
    for n in range(7):
        col = S[:, dof(n - 1) + n]
        assert np.count_nonzero(np.abs(col) > 1e-15) == 1
        assert_allclose(col[dof(n - 1) + n], 1.0, atol=1e-15)


def test_q111_through_p_matches_direct():
    rng = np.random.default_rng(43)
    c = rng.standard_normal(dof(10))
    to_p = q_conversion((1, 1, 1), (0, 0, 0), 10)
    assert_allclose(clenshaw((0, 0, 0), to_p.matvec(c), X, Y), q_eval((1, 1, 1), c, X, Y), atol=1e-11)


def test_conversion_path_independence():
    for src, dst in [((1, 1, 1), (0, 0, 0)), ((1, 1, 1), (1, 0, 0)), ((1, 1, 0), (0, 0, 0))]:
        ref = q_conversion(src, dst, 12, order="abc").toarray()
        for order in ("acb", "bac", "bca", "cab", "cba"):
            assert_allclose(q_conversion(src, dst, 12, order=order).toarray(), ref, atol=1e-12)


def test_conversion_profile_upper_bidiagonal():
    for src, dst in Q_STEPS:
        (lo, up), _ = q_conversion(src, dst, 10).measured_bandwidths()
        assert lo <= 0 and up <= 1, (src, dst)


def test_illegal_conversion():
    with pytest.raises(ValueError):
        q_conversion((1, 0, 0), (0, 1, 0), 4)


# ------------------------------------------------------------ derivatives
@pytest.mark.parametrize("fl,direction", Q_DERIVATIVES)
def test_q_derivatives_match_oracle(fl, direction):
    op = q_derivative(fl, direction, 10)
    assert q_derivative_error(fl, direction, op, X, Y) <= 1e-11
    (lo, up), _ = op.measured_bandwidths()
    assert lo <= -1 and up <= 1


def test_q_derivative_examples():
    D = q_derivative((0, 1, 1), "y", 8).toarray()
    for n in range(9):
        assert not D[:, dof(n - 1)].any()
    h = 1e-5
    dx = (q_eval((1, 0, 1), unit(2, 2, 0), X + h, Y) - q_eval((1, 0, 1), unit(2, 2, 0), X - h, Y)) / (2 * h)
    assert_allclose(dx, 2 * P_all((0, 0, 0), 1, X, Y)[1], atol=1e-6)
    col = q_derivative((1, 1, 0), "z", 3).toarray()[:, dof(2) + 3]
    assert_allclose(col, 3 * unit(2, 2, 2), atol=1e-10)


def test_unsupported_derivative():
    with pytest.raises(ValueError):
        q_derivative((0, 1, 1), "x", 4)


# ------------------------------------------------------------ restriction
def test_restriction_examples():
    R = restriction("x", (1, 0, 0), 6)
    assert_allclose(R @ unit(6), np.eye(7)[0], atol=0)
    for n in range(7):
        assert_allclose(R @ unit(6, n, n), np.eye(7)[n], atol=0)
    assert all(np.count_nonzero(R.matrix.toarray()[i]) == 1 for i in range(7))


def test_restriction_flag_mismatch():
    with pytest.raises(ValueError):
        restriction("y", (1, 0, 1), 4)


def test_full_restriction_traces():
    N = 10
    rng = np.random.default_rng(44)
    c = rng.standard_normal(dof(N))
    traces = full_restriction(N).matvec(c).reshape(3, N + 1)
    s = np.linspace(0, 1, 20)
    for edge, coeffs in zip("xyz", traces):
        ex, ey = edge_points(edge, s)
        assert_allclose(legendre_edge_synthesis(coeffs, s), q_eval((1, 1, 1), c, ex, ey), atol=1e-11)


def test_restriction_from_two_edge_family():
    rng = np.random.default_rng(45)
    c = rng.standard_normal(dof(8))
    s = np.linspace(0, 1, 20)
    for edge, fl in [("x", (1, 1, 0)), ("z", (0, 1, 1)), ("y", (1, 1, 0))]:
        ex, ey = edge_points(edge, s)
        got = legendre_edge_synthesis(restriction(edge, fl, 8) @ c, s)
        assert_allclose(got, q_eval(fl, c, ex, ey), atol=1e-11)


# ---------------------------------------------------------------- vanishing
@pytest.mark.parametrize("fl", FAMILIES)
def test_vanishing_on_flagged_edges(fl):
    s = np.linspace(0.01, 0.99, 20)
    for edge, flag in zip("xyz", fl):
        if not flag:
            continue
        ex, ey = edge_points(edge, s)
        # the functions that restrict to nonzero traces are exactly the R_edge columns
        R = restriction(edge, fl, 10).matrix.toarray()
        active = np.flatnonzero(np.abs(R).sum(axis=0) > 0)
        for n in range(11):
            for k in range(n + 1):
                if dof(n - 1) + k in active:
                    continue
                assert np.abs(Q(fl, n, k, ex, ey)).max() < 1e-13, (fl, edge, n, k)


# ---------------------------------------------------------- tilde Laplacian
def test_tilde_laplacian_on_polynomial():
    N = 8
    c = np.zeros(dof(N))
    rng = np.random.default_rng(46)
    c[: dof(5)] = rng.standard_normal(dof(5))
    h = 1e-4

    def u(x, y):
        return q_eval((1, 1, 1), c, x, y)

    lap = (u(X + h, Y) + u(X - h, Y) + u(X, Y + h) + u(X, Y - h) - 4 * u(X, Y)) / h**2
    got = clenshaw((1, 1, 1), tilde_laplacian(N).matvec(c), X, Y)
    assert_allclose(got, lap, atol=1e-5 * np.abs(lap).max())


def test_tilde_laplacian_of_quadratic():
    # u = x^2 has Laplacian 2; u expanded in Q^{(1,1,1)} through its P^{(0,0,0)} coefficients
    N = 4
    S = q_conversion((1, 1, 1), (0, 0, 0), N).toarray()
    target = project((0, 0, 0), lambda x, y: x**2 + 0 * y, N)
    c = np.linalg.solve(S, target)
    assert_allclose(tilde_laplacian(N).matvec(c), project((1, 1, 1), lambda x, y: 2 + 0 * x, N - 2), atol=1e-11)
