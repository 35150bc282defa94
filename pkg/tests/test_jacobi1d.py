import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import eval_jacobi

from trispectral.jacobi1d import (
    JacobiParams1D,
    eval_clenshaw_1d,
    eval_forward,
    gauss_rule,
    norm_squared_1d,
    three_term_coeffs,
)


def test_legendre_recurrence_start():
    r = three_term_coeffs(0, 0, 0)
    assert_allclose([r.a[0], r.b[0]], [0.5, 0.5], rtol=0, atol=1e-16)


def test_recurrence_lengths_and_similarity_condition():
    r = three_term_coeffs(1.5, 0.5, 30)
    assert len(r.a) == len(r.b) == len(r.c) == 31
    assert np.all(r.b != 0)
    assert np.all(r.c / r.b > 0)


def test_recurrence_matches_scipy():
    al, be, K = 2.0, 1.0, 12
    x = np.linspace(0.05, 0.95, 7)
    r = three_term_coeffs(al, be, K)
    p = np.array([eval_jacobi(k, al, be, 2 * x - 1) for k in range(K + 2)])
    for k in range(1, K + 1):
        assert_allclose(r.b[k] * p[k + 1] + r.a[k] * p[k] + r.c[k - 1] * p[k - 1], x * p[k], atol=1e-12)


@pytest.mark.parametrize("bad", [(-1.0, 0.0), (0.0, -1.5)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        JacobiParams1D(*bad)


def test_clenshaw_examples():
    assert eval_clenshaw_1d(0, 0, [1.0], 0.77) == 1.0
    assert_allclose(eval_clenshaw_1d(0, 0, [0.0, 1.0], 0.3), -0.4, atol=1e-15)
    assert_allclose(eval_clenshaw_1d(0, 0, [1.0, 1.0, 1.0], 0.5), 0.5, atol=1e-15)


def test_clenshaw_matches_forward_recurrence():
    x = np.linspace(0, 1, 11)
    V = eval_forward(0.5, 2.0, 50, x)
    for k in (0, 1, 7, 30, 50):
        e = np.zeros(k + 1)
        e[k] = 1
        assert_allclose(eval_clenshaw_1d(0.5, 2.0, e, x), V[k], rtol=1e-13, atol=1e-13 * np.abs(V[k]).max())


def test_gauss_rule_small_cases():
    g = gauss_rule(0, 0, 1)
    assert_allclose([g.nodes[0], g.weights[0]], [0.5, 1.0], atol=1e-15)
    g = gauss_rule(0, 0, 2)
    assert_allclose(g.nodes, [0.5 - 1 / (2 * np.sqrt(3)), 0.5 + 1 / (2 * np.sqrt(3))], atol=1e-15)
    assert_allclose(g.weights, [0.5, 0.5], atol=1e-15)
    assert_allclose(gauss_rule(0, 0, 5).integrate(gauss_rule(0, 0, 5).nodes ** 9), 0.1, atol=1e-14)


def test_gauss_rule_rejects_empty():
    with pytest.raises(ValueError):
        gauss_rule(0, 0, 0)


def test_norm_examples():
    assert_allclose(norm_squared_1d(0, 0, 0), 1.0, rtol=1e-15)
    assert_allclose(norm_squared_1d(0, 0, 1), 1 / 3, rtol=1e-15)
    assert_allclose(norm_squared_1d(1, 0, 0), 0.5, rtol=1e-15)


def test_norm_rejects_huge_parameters():
    with pytest.raises(ValueError):
        norm_squared_1d(150, 0, 2)


def test_orthogonality_by_quadrature():
    al, be = 1.0, 2.0
    g = gauss_rule(al, be, 25)
    V = eval_forward(al, be, 20, g.nodes)
    G = (V * g.weights) @ V.T
    norms = norm_squared_1d(al, be, np.arange(21))
    assert_allclose(np.diag(G), norms, rtol=1e-12)
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() <= 1e-12 * norms.max()
