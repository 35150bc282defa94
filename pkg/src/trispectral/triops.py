"""Sparse operators on expansions in the triangle Jacobi bases ``P^{(a,b,c)}``.

Conventions
-----------
Coefficients are ordered by total degree: ``(n, k)`` sits at flat index
``n (n + 1) / 2 + k``.  An operator ``M`` maps source coefficients to target
coefficients, ``target = M @ source``.

Truncation: an operator built "at degree ``N``" keeps source blocks
``0..N`` and every target block reached exactly, i.e. ``0..N + shift`` with
``shift = 0`` for conversion, ``+1`` for lowering and weighted
differentiation and ``-1`` for differentiation.  Compositions chain these
shifts, so every product is exact.  Square systems are cut down with
:meth:`BlockBandedMatrix.truncate` afterwards.

``z = 1 - x - y`` and ``d/dz = d/dy - d/dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .blockbanded import BlockBandedMatrix, degree_sizes, dof
from .coefficients import BasisTag

__all__ = [
    "ParameterTriple",
    "OperatorDescriptor",
    "KINDS",
    "mode_indices",
    "assemble",
    "conversion",
    "conversion_path",
    "lowering",
    "lowering_path",
    "differentiation",
    "weighted_differentiation",
    "jacobi_operators",
    "jacobi_transposes",
    "laplacian_strong",
    "laplacian_weighted",
    "laplacian_w2",
    "biharmonic",
    "helmholtz_weighted",
    "build",
    "chain",
]

KINDS = ("S", "L", "Dx", "Dy", "Dz", "Wx", "Wy", "Wz", "Jx", "Jy")
_AXIS = {"a": 0, "b": 1, "c": 2}


@dataclass(frozen=True)
class ParameterTriple:
    """Exponents ``(a, b, c)`` of the weight ``x^a y^b z^c``."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        for name in "abc":
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"parameters must be nonnegative integers, got {name}={v}")

    @classmethod
    def of(cls, p) -> "ParameterTriple":
        return p if isinstance(p, ParameterTriple) else cls(*(int(v) for v in p))

    def astuple(self):
        return (self.a, self.b, self.c)

    def shift(self, da=0, db=0, dc=0) -> "ParameterTriple":
        return ParameterTriple(self.a + da, self.b + db, self.c + dc)

    @property
    def tag(self) -> BasisTag:
        return BasisTag("P", self.astuple())

    def __iter__(self):
        return iter(self.astuple())


_STEP = {
    "S": {"a": (1, 0, 0), "b": (0, 1, 0), "c": (0, 0, 1)},
    "L": {"a": (-1, 0, 0), "b": (0, -1, 0), "c": (0, 0, -1)},
    "Dx": (1, 0, 1),
    "Dy": (0, 1, 1),
    "Dz": (1, 1, 0),
    "Wx": (-1, 0, -1),
    "Wy": (0, -1, -1),
    "Wz": (-1, -1, 0),
}
_DEGREE_SHIFT = {"S": 0, "L": 1, "Dx": -1, "Dy": -1, "Dz": -1, "Wx": 1, "Wy": 1, "Wz": 1, "Jx": 1, "Jy": 1}


@dataclass(frozen=True)
class OperatorDescriptor:
    """A single legal step ``kind`` from ``source``.

    ``which`` selects the parameter for ``S`` and ``L`` (``"a"``, ``"b"`` or
    ``"c"``) and is ignored otherwise.
    """

    kind: str
    source: ParameterTriple
    which: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "source", ParameterTriple.of(self.source))
        if self.kind in ("S", "L") and self.which not in _AXIS:
            raise ValueError(f"{self.kind} needs which in 'abc', got {self.which!r}")
        t = self.target  # validates decrements
        del t

    @property
    def target(self) -> ParameterTriple:
        if self.kind in ("Jx", "Jy"):
            return self.source
        step = _STEP[self.kind]
        if isinstance(step, dict):
            step = step[self.which]
        a, b, c = (s + d for s, d in zip(self.source, step))
        if min(a, b, c) < 0:
            raise ValueError(f"{self.kind} from {self.source.astuple()} lowers a zero parameter")
        return ParameterTriple(a, b, c)

    @property
    def degree_shift(self) -> int:
        return _DEGREE_SHIFT[self.kind]

    def build(self, N: int) -> BlockBandedMatrix:
        return build(self, N)


# --------------------------------------------------------------- assembly
@lru_cache(maxsize=64)
def _modes(N: int):
    n = np.repeat(np.arange(N + 1), np.arange(1, N + 2))
    k = np.arange(dof(N)) - n * (n + 1) // 2
    n.setflags(write=False)
    k.setflags(write=False)
    return n, k


def mode_indices(N: int):
    """Arrays ``(n, k)`` of all modes of total degree ``<= N`` in storage order."""
    return _modes(N)


def assemble(terms, N_rows, N_cols, profile, source, target) -> BlockBandedMatrix:
    """Assemble from ``(col, row_n, row_k, value)`` term arrays.

    ``source`` and ``target`` are basis tags.  ``profile`` is the declared
    ``((L, U), (lam, mu))`` or ``None`` to use the measured one.

    Terms landing on nonexistent modes (``k < 0``, ``k > n`` or ``n`` out of
    range) are dropped; that is how the appendix relations read at the edges.
    """
    rows, cols, vals = [], [], []
    for col, rn, rk, v in terms:
        v = np.broadcast_to(np.asarray(v, dtype=float), col.shape)
        keep = (rn >= 0) & (rn <= N_rows) & (rk >= 0) & (rk <= rn) & (v != 0)
        rows.append(rn[keep] * (rn[keep] + 1) // 2 + rk[keep])
        cols.append(col[keep])
        vals.append(v[keep])
    shape = (dof(N_rows), dof(N_cols))
    data = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    )
    if profile is None:
        profile = (None, None)
    return BlockBandedMatrix(
        data,
        degree_sizes(N_rows),
        degree_sizes(N_cols),
        profile[0],
        profile[1],
        source=source,
        target=target,
        check=False,
    )


def _floats(N):
    n, k = _modes(N)
    return n, k, n.astype(float), k.astype(float), np.arange(n.size)


def _conversion(p: ParameterTriple, which: str, N: int) -> BlockBandedMatrix:
    a, b, c = p
    s = a + b + c
    n, k, nf, kf, col = _floats(N)
    den = 2 * nf + s + 2
    if which == "a":
        terms = [
            (col, n, k, (nf + kf + s + 2) / den),
            (col, n - 1, k, (nf + kf + b + c + 1) / den),
        ]
        prof = ((0, 1), (0, 0))
        tgt = p.shift(da=1)
    else:
        den = den * (2 * kf + b + c + 1)
        # b- and c-raises differ only in the signs and roles of b and c
        e = c if which == "b" else b
        sg = 1.0 if which == "b" else -1.0
        terms = [
            (col, n, k, (nf + kf + s + 2) * (kf + b + c + 1) / den),
            (col, n - 1, k, -(nf - kf + a) * (kf + b + c + 1) / den),
            (col, n - 1, k - 1, sg * (kf + e) * (nf + kf + b + c + 1) / den),
            (col, n, k - 1, -sg * (kf + e) * (nf - kf + 1) / den),
        ]
        prof = ((0, 1), (0, 1))
        tgt = p.shift(db=1) if which == "b" else p.shift(dc=1)
    return assemble(terms, N, N, prof, p.tag, tgt.tag)


def _lowering(p: ParameterTriple, which: str, N: int) -> BlockBandedMatrix:
    a, b, c = p
    s = a + b + c
    n, k, nf, kf, col = _floats(N)
    den = 2 * nf + s + 2
    if which == "a":
        if a < 1:
            raise ValueError("lowering a needs a >= 1")
        terms = [
            (col, n, k, (nf - kf + a) / den),
            (col, n + 1, k, (nf - kf + 1) / den),
        ]
        prof = ((1, 0), (0, 0))
        tgt = p.shift(da=-1)
    else:
        e = b if which == "b" else c
        if e < 1:
            raise ValueError(f"lowering {which} needs {which} >= 1")
        den = den * (2 * kf + b + c + 1)
        sg = 1.0 if which == "b" else -1.0
        terms = [
            (col, n, k, (kf + e) * (nf + kf + b + c + 1) / den),
            (col, n, k + 1, -sg * (kf + 1) * (nf - kf + a) / den),
            (col, n + 1, k, -(kf + e) * (nf - kf + 1) / den),
            (col, n + 1, k + 1, sg * (kf + 1) * (nf + kf + s + 2) / den),
        ]
        prof = ((1, 0), (1, 0))
        tgt = p.shift(db=-1) if which == "b" else p.shift(dc=-1)
    return assemble(terms, N + 1, N, prof, p.tag, tgt.tag)


def _differentiation(p: ParameterTriple, direction: str, N: int) -> BlockBandedMatrix:
    a, b, c = p
    s = a + b + c
    n, k, nf, kf, col = _floats(N)
    q = 2 * kf + b + c + 1
    if direction == "y":
        terms = [(col, n - 1, k - 1, kf + b + c + 1)]
        prof = ((-1, 1), (-1, 1))
        tgt = p.shift(db=1, dc=1)
    elif direction == "x":
        terms = [
            (col, n - 1, k, (nf + kf + s + 2) * (kf + b + c + 1) / q),
            (col, n - 1, k - 1, (kf + b) * (nf + kf + b + c + 1) / q),
        ]
        prof = ((-1, 1), (0, 1))
        tgt = p.shift(da=1, dc=1)
    elif direction == "z":
        terms = [
            (col, n - 1, k, -(nf + kf + s + 2) * (kf + b + c + 1) / q),
            (col, n - 1, k - 1, (kf + c) * (nf + kf + b + c + 1) / q),
        ]
        prof = ((-1, 1), (0, 1))
        tgt = p.shift(da=1, db=1)
    else:
        raise ValueError(f"direction must be x, y or z, got {direction!r}")
    return assemble(terms, N - 1, N, prof, p.tag, tgt.tag)


def _weighted_differentiation(p: ParameterTriple, direction: str, N: int) -> BlockBandedMatrix:
    a, b, c = p
    n, k, nf, kf, col = _floats(N)
    q = 2 * kf + b + c + 1
    if direction == "y":
        if b < 1 or c < 1:
            raise ValueError("weighted y-derivative needs b, c >= 1")
        terms = [(col, n + 1, k + 1, -(kf + 1))]
        prof = ((1, -1), (1, -1))
        tgt = p.shift(db=-1, dc=-1)
    elif direction == "x":
        if a < 1 or c < 1:
            raise ValueError("weighted x-derivative needs a, c >= 1")
        terms = [
            (col, n + 1, k, -(kf + c) * (nf - kf + 1) / q),
            (col, n + 1, k + 1, -(kf + 1) * (nf - kf + a) / q),
        ]
        prof = ((1, -1), (1, 0))
        tgt = p.shift(da=-1, dc=-1)
    elif direction == "z":
        if a < 1 or b < 1:
            raise ValueError("weighted z-derivative needs a, b >= 1")
        terms = [
            (col, n + 1, k, (kf + b) * (nf - kf + 1) / q),
            (col, n + 1, k + 1, -(kf + 1) * (nf - kf + a) / q),
        ]
        prof = ((1, -1), (1, 0))
        tgt = p.shift(da=-1, db=-1)
    else:
        raise ValueError(f"direction must be x, y or z, got {direction!r}")
    return assemble(terms, N + 1, N, prof, p.tag, tgt.tag)


@lru_cache(maxsize=512)
def _build_cached(kind: str, src: tuple, which: str, N: int) -> BlockBandedMatrix:
    p = ParameterTriple(*src)
    if kind == "S":
        return _conversion(p, which, N)
    if kind == "L":
        return _lowering(p, which, N)
    if kind in ("Dx", "Dy", "Dz"):
        return _differentiation(p, kind[1], N)
    if kind in ("Wx", "Wy", "Wz"):
        return _weighted_differentiation(p, kind[1], N)
    jx, jy = _jacobi_transposes(src, N)
    return jx if kind == "Jx" else jy


def build(desc: OperatorDescriptor, N: int) -> BlockBandedMatrix:
    """Exact rectangular operator for ``desc`` acting on degree ``<= N``."""
    if N < 0:
        raise ValueError("truncation degree must be nonnegative")
    return _build_cached(desc.kind, desc.source.astuple(), desc.which, int(N))


def _target_degree(op: BlockBandedMatrix) -> int:
    return len(op.row_sizes) - 1


def chain(N: int, *descs: OperatorDescriptor) -> BlockBandedMatrix:
    """Compose single steps written left to right as in ``A B C`` (``C`` acts first)."""
    out = None
    deg = N
    for d in reversed(descs):
        if out is not None and d.source.tag != out.target:
            raise ValueError(f"{d.kind} acts on {d.source.astuple()}, previous step lands in {out.target}")
        op = build(d, deg)
        out = op if out is None else op @ out
        deg = _target_degree(op)
    return out


def _sum(*ops: BlockBandedMatrix) -> BlockBandedMatrix:
    nrb = max(len(o.row_sizes) for o in ops)
    ops = [o if len(o.row_sizes) == nrb else o.pad(nrb, len(o.col_sizes)) for o in ops]
    out = ops[0]
    for o in ops[1:]:
        out = out + o
    return out


# -------------------------------------------------------- public factories
def conversion(src, which: str, N: int) -> BlockBandedMatrix:
    """``S_{src}^{src + e_which}`` on degree ``<= N``; square."""
    return build(OperatorDescriptor("S", src, which), N)


def lowering(src, which: str, N: int) -> BlockBandedMatrix:
    """``L_{src}^{src - e_which}``: multiplication by ``x``, ``y`` or ``z``."""
    return build(OperatorDescriptor("L", src, which), N)


def differentiation(src, direction: str, N: int) -> BlockBandedMatrix:
    """``D_direction`` from ``P^{src}``; rows reach degree ``N - 1``."""
    return build(OperatorDescriptor("D" + direction, src), N)


def weighted_differentiation(src, direction: str, N: int) -> BlockBandedMatrix:
    """``W_direction``: derivative of ``x^a y^b z^c f``, rows reach ``N + 1``."""
    return build(OperatorDescriptor("W" + direction, src), N)


def _path(src: ParameterTriple, dst: ParameterTriple, kind: str, order: str):
    """Single steps from ``src`` to ``dst``, listed rightmost-first."""
    steps = []
    cur = src
    for w in order:
        i = _AXIS[w]
        while cur.astuple()[i] != dst.astuple()[i]:
            d = OperatorDescriptor(kind, cur, w)
            steps.append(d)
            cur = d.target
    return steps


def conversion_path(src, dst, N: int, order: str = "abc") -> BlockBandedMatrix:
    """Compose conversions raising ``src`` to ``dst``, raising parameters in ``order``."""
    src, dst = ParameterTriple.of(src), ParameterTriple.of(dst)
    if any(d < s for s, d in zip(src, dst)):
        raise ValueError("conversion can only raise parameters")
    steps = _path(src, dst, "S", order)
    if not steps:
        return BlockBandedMatrix.identity(degree_sizes(N), src.tag)
    return chain(N, *reversed(steps))


def lowering_path(src, dst, N: int, order: str = "abc") -> BlockBandedMatrix:
    """Compose lowerings: multiplication by ``x^{a-a'} y^{b-b'} z^{c-c'}``."""
    src, dst = ParameterTriple.of(src), ParameterTriple.of(dst)
    if any(d > s for s, d in zip(src, dst)):
        raise ValueError("lowering can only decrease parameters")
    steps = _path(src, dst, "L", order)
    if not steps:
        return BlockBandedMatrix.identity(degree_sizes(N), src.tag)
    return chain(N, *reversed(steps))


@lru_cache(maxsize=64)
def _jacobi_transposes(src: tuple, N: int):
    p = ParameterTriple(*src)
    # multiplication by x is raise-then-lower, valid also at a = 0
    jx = build(OperatorDescriptor("L", p.shift(da=1), "a"), N) @ build(OperatorDescriptor("S", p, "a"), N)
    jy = build(OperatorDescriptor("L", p.shift(db=1), "b"), N) @ build(OperatorDescriptor("S", p, "b"), N)
    return jx, jy


def jacobi_transposes(p, N: int):
    """``(Jx^T, Jy^T)``: coefficients of ``x f`` and ``y f``; rows reach ``N + 1``."""
    return _jacobi_transposes(ParameterTriple.of(p).astuple(), int(N))


def jacobi_operators(p, N: int):
    """Truncated Jacobi operators ``(Jx, Jy)`` on blocks ``0..N``.

    ``Jx @ P(x, y) = x P(x, y)`` for the vector ``P`` of basis polynomials,
    up to the coupling into block ``N + 1`` that the truncation drops.
    """
    jxt, jyt = jacobi_transposes(p, N)
    return jxt.truncate(N + 1, N + 1).T, jyt.truncate(N + 1, N + 1).T


# ------------------------------------------------------ named compositions
def _D(kind, src):
    return OperatorDescriptor(kind, src)


def _S(src, which):
    return OperatorDescriptor("S", src, which)


def _L(src, which):
    return OperatorDescriptor("L", src, which)


def laplacian_strong(N: int) -> BlockBandedMatrix:
    """``Delta`` from ``P^{(0,0,0)}`` to ``P^{(2,2,2)}``; rows reach ``N - 2``."""
    if N < 2:
        raise ValueError("the strong Laplacian needs N >= 2")
    xx = chain(N, _S((2, 1, 2), "b"), _S((2, 0, 2), "b"), _D("Dx", (1, 0, 1)), _D("Dx", (0, 0, 0)))
    yy = chain(N, _S((1, 2, 2), "a"), _S((0, 2, 2), "a"), _D("Dy", (0, 1, 1)), _D("Dy", (0, 0, 0)))
    return xx + yy


def laplacian_weighted(N: int) -> BlockBandedMatrix:
    """``Delta_W``: from ``xyz P^{(1,1,1)}`` coefficients to ``P^{(1,1,1)}``.

    Rows reach degree ``N + 1`` (the Laplacian of a degree ``N + 3``
    polynomial).  The source tag is ``weightedP(1,1,1)``.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    xx = chain(N, _S((1, 0, 1), "b"), _D("Dx", (0, 0, 0)), _L((0, 1, 0), "b"), _D("Wx", (1, 1, 1)))
    yy = chain(N, _S((0, 1, 1), "a"), _D("Dy", (0, 0, 0)), _L((1, 0, 0), "a"), _D("Wy", (1, 1, 1)))
    out = xx + yy
    out.source = BasisTag("weightedP", (1, 1, 1))
    return out


def laplacian_w2(N: int) -> BlockBandedMatrix:
    """``Delta_{W^2}``: from ``(xyz)^2 P^{(2,2,2)}`` to ``P^{(0,0,0)}``; rows reach ``N + 4``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    xx = chain(N, _L((0, 1, 0), "b"), _D("Wx", (1, 1, 1)), _L((1, 2, 1), "b"), _D("Wx", (2, 2, 2)))
    yy = chain(N, _L((1, 0, 0), "a"), _D("Wy", (1, 1, 1)), _L((2, 1, 1), "a"), _D("Wy", (2, 2, 2)))
    out = xx + yy
    out.source = BasisTag("weightedP", (2, 2, 2))
    return out


def biharmonic(N: int) -> BlockBandedMatrix:
    """``Delta^2`` from ``(xyz)^2 P^{(2,2,2)}`` to ``P^{(2,2,2)}``; rows reach ``N + 2``."""
    w2 = laplacian_w2(N)
    lap = laplacian_strong(_target_degree(w2))
    out = lap @ w2
    out.source = w2.source
    return out


def helmholtz_weighted(v_coeffs, k: float, N: int) -> BlockBandedMatrix:
    """``Delta_W + k^2 S M_v L`` on ``xyz P^{(1,1,1)}`` coefficients.

    ``L`` multiplies by ``xyz`` into ``P^{(0,0,0)}``, ``M_v`` multiplies by
    ``v`` there and ``S`` converts back to ``P^{(1,1,1)}``.  ``v_coeffs`` may
    be in any ``P`` basis; the multiplication operator is built with the
    Jacobi operators of ``P^{(0,0,0)}`` because that is the space it acts on.
    Rows reach degree ``N + 3 + deg(v)``.
    """
    from .evaluate import multiplication_operator

    lap = laplacian_weighted(N)
    if k == 0 or not np.any(v_coeffs.values):
        return lap
    low = lowering_path((1, 1, 1), (0, 0, 0), N)
    mv = multiplication_operator(v_coeffs, (0, 0, 0), _target_degree(low))
    up = conversion_path((0, 0, 0), (1, 1, 1), _target_degree(mv))
    out = _sum(lap, (up @ mv @ low) * (k * k))
    out.source = lap.source
    return out
