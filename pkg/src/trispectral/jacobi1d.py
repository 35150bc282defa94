"""Shifted Jacobi polynomials on [0, 1].

The family ``P~_k^{(alpha, beta)}(x) = P_k^{(alpha, beta)}(2x - 1)`` is kept
unnormalized; it is orthogonal with respect to ``(1 - x)**alpha * x**beta``.
Norms are supplied separately by :func:`norm_squared_1d`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import betaln, gammaln

__all__ = [
    "JacobiParams1D",
    "ThreeTermCoeffs",
    "QuadratureRule1D",
    "three_term_coeffs",
    "eval_forward",
    "eval_clenshaw_1d",
    "gauss_rule",
    "norm_squared_1d",
    "legendre_rule",
]

_MAX_PARAM = 100.0


@dataclass(frozen=True)
class JacobiParams1D:
    """Exponents of the weight ``(1 - x)**alpha * x**beta`` on [0, 1]."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(
                f"Jacobi parameters must exceed -1, got alpha={self.alpha}, beta={self.beta}"
            )


@dataclass(frozen=True)
class ThreeTermCoeffs:
    """Coefficients of ``b[k] p_{k+1} + a[k] p_k + c[k-1] p_{k-1} = x p_k``.

    ``c[k]`` is the coefficient of ``p_k`` in the expansion of ``x p_{k+1}``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.asarray(values) @ self.weights


def _params(alpha, beta) -> JacobiParams1D:
    if isinstance(alpha, JacobiParams1D):
        return alpha
    return JacobiParams1D(float(alpha), float(beta))


def three_term_coeffs(alpha, beta=None, n_max: int = 0) -> ThreeTermCoeffs:
    """Recurrence coefficients of the shifted Jacobi family up to degree ``n_max``.

    These are the classical ``[-1, 1]`` coefficients mapped through
    ``x = (t + 1) / 2``.  At ``k = 0`` the closed forms contain removable
    singularities when ``alpha + beta`` is 0 or -1; there the limits
    ``(beta - alpha) / (alpha + beta + 2)`` (diagonal) and
    ``2 / (alpha + beta + 2)`` (super-diagonal) are used.

    Parameters
    ----------
    alpha, beta : float or JacobiParams1D
        Either two exponents or a single :class:`JacobiParams1D`.
    n_max : int
        Highest degree ``k`` for which ``a_k, b_k, c_k`` are returned.
    """
    p = alpha if isinstance(alpha, JacobiParams1D) else _params(alpha, beta)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    al, be = p.alpha, p.beta
    ab = al + be
    k = np.arange(n_max + 1, dtype=float)
    s = 2 * k + ab

    with np.errstate(divide="ignore", invalid="ignore"):
        big_a = 2 * (k + 1) * (k + ab + 1) / ((s + 1) * (s + 2))
        big_b = (be - al) * (be + al) / (s * (s + 2))
    big_a[0] = 2.0 / (ab + 2)
    big_b[0] = (be - al) / (ab + 2)

    kk = k + 1
    ss = 2 * kk + ab
    big_c = 2 * (kk + al) * (kk + be) / (ss * (ss + 1))

    return ThreeTermCoeffs(a=(1 + big_b) / 2, b=big_a / 2, c=big_c / 2)


def eval_forward(alpha, beta, n_max: int, x) -> np.ndarray:
    """Values of ``P~_0, ..., P~_{n_max}`` at ``x`` by forward recurrence.

    Returns an array of shape ``(n_max + 1,) + np.shape(x)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max == 0:
        return out
    r = three_term_coeffs(alpha, beta, n_max)
    out[1] = (x - r.a[0]) / r.b[0]
    for k in range(1, n_max):
        out[k + 1] = ((x - r.a[k]) * out[k] - r.c[k - 1] * out[k - 1]) / r.b[k]
    return out


def eval_clenshaw_1d(alpha, beta, coeffs, x):
    """Evaluate ``sum_k coeffs[k] P~_k(x)`` by back substitution.

    This solves the upper triangular system ``L_N(x)^T v = coeffs`` and
    returns ``v[0]``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ValueError("coeffs must be a nonempty vector")
    x = np.asarray(x, dtype=float)
    n = coeffs.size - 1
    r = three_term_coeffs(alpha, beta, max(n, 1))
    v1 = np.zeros_like(x)  # v_{j+1}
    v2 = np.zeros_like(x)  # v_{j+2}
    for j in range(n, 0, -1):
        vj = (coeffs[j] - (r.a[j] - x) * v1 - r.c[j] * v2) / r.b[j - 1]
        v2, v1 = v1, vj
    v0 = coeffs[0] - (r.a[0] - x) * v1 - r.c[0] * v2
    return v0 if v0.ndim else float(v0)


def norm_squared_1d(alpha, beta, k) -> np.ndarray:
    """``int_0^1 x**beta (1 - x)**alpha P~_k(x)**2 dx`` in closed form.

    ``k`` may be an integer or an integer array.
    """
    p = _params(alpha, beta)
    if abs(p.alpha) > _MAX_PARAM or abs(p.beta) > _MAX_PARAM:
        raise ValueError("Jacobi parameters beyond +-100 overflow the closed-form norm")
    return _norm_squared(p.alpha, p.beta, k)


def _norm_squared(al, be, k):
    # log-gamma form, safe for the large alpha = 2k + b + c + 1 of triangle norms
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("degree must be nonnegative")
    # k = 0 is the weight mass B(alpha + 1, beta + 1).
    kp = np.where(k == 0, 1.0, k)
    val = np.exp(
        gammaln(kp + al + 1) + gammaln(kp + be + 1) - gammaln(kp + al + be + 1) - gammaln(kp + 1)
    ) / (2 * kp + al + be + 1)
    val = np.where(k == 0, np.exp(betaln(al + 1, be + 1)), val)
    return val if val.ndim else float(val)


def gauss_rule(alpha, beta, n: int) -> QuadratureRule1D:
    """``n``-point Gauss rule for ``(1 - x)**alpha * x**beta`` on [0, 1].

    Nodes are eigenvalues of the symmetrized Jacobi matrix (Golub-Welsch).
    Weights come from the Christoffel function of the orthonormal family,
    which is more accurate than squaring eigenvector components.
    """
    p = _params(alpha, beta)
    if n < 1:
        raise ValueError("a Gauss rule needs at least one node")
    r = three_term_coeffs(p, None, n)
    off = np.sqrt(r.b[: n - 1] * r.c[: n - 1])
    if n == 1:
        nodes = r.a[:1].copy()
    else:
        try:
            nodes = eigh_tridiagonal(r.a[:n], off, eigvals_only=True)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("tridiagonal eigensolver failed to converge") from exc
    nodes = np.sort(nodes)
    if n > 1:
        # eigenvalues carry O(eps * ||J||) absolute error; two Newton steps on P~_n polish them
        scale = n + p.alpha + p.beta + 1
        for _ in range(2):
            val = eval_forward(p.alpha, p.beta, n, nodes)[n]
            der = scale * eval_forward(p.alpha + 1, p.beta + 1, n - 1, nodes)[n - 1]
            nodes = nodes - val / der

    mass = np.exp(betaln(p.alpha + 1, p.beta + 1))
    q_prev = np.zeros(n)
    q = np.full(n, 1 / np.sqrt(mass))
    total = q**2
    for k in range(n - 1):
        q_next = ((nodes - r.a[k]) * q - (off[k - 1] * q_prev if k else 0.0)) / off[k]
        q_prev, q = q, q_next
        total += q**2
    weights = 1 / total
    if not np.all(np.isfinite(nodes)) or np.any(weights <= 0):
        raise RuntimeError("Gauss rule construction produced invalid nodes or weights")
    return QuadratureRule1D(nodes=nodes, weights=weights)


def legendre_rule(n: int) -> QuadratureRule1D:
    return gauss_rule(0.0, 0.0, n)
