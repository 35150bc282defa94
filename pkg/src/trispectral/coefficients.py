"""Degree-blocked coefficient vectors, their basis tags, and the JSON file format.

File layout::

    {"basis": {"family": "P", "a": 1, "b": 1, "c": 1},
     "degree": 2,
     "blocks": [[f00], [f10, f11], [f20, f21, f22]]}

``family`` is one of ``"P"``, ``"weightedP"``, ``"Q"`` or
``"legendre-edge"``.  Edge expansions store one coefficient per block.
Floats are written in shortest round-trip form, so reading a file back is
bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blockbanded import dof

__all__ = ["BasisTag", "CoefficientVector", "FAMILIES", "read_coefficients", "write_coefficients"]

FAMILIES = ("P", "weightedP", "Q", "legendre-edge")


@dataclass(frozen=True)
class BasisTag:
    """Which family a coefficient vector lives in.

    ``params`` is the triple ``(a, b, c)``: Jacobi exponents for ``P`` and
    ``weightedP``, edge flags for ``Q``; it is ignored for edge expansions.
    """

    family: str
    params: tuple = (0, 0, 0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        params = tuple(int(p) for p in self.params)
        if len(params) != 3:
            raise ValueError("basis parameters must be a triple")
        if self.family == "Q" and not all(p in (0, 1) for p in params):
            raise ValueError(f"Q-basis flags must be 0 or 1, got {params}")
        object.__setattr__(self, "params", params)

    @property
    def is_edge(self) -> bool:
        return self.family == "legendre-edge"

    def to_json(self) -> dict:
        a, b, c = self.params
        return {"family": self.family, "a": a, "b": b, "c": c}

    @classmethod
    def from_json(cls, obj: dict) -> "BasisTag":
        return cls(obj["family"], (obj.get("a", 0), obj.get("b", 0), obj.get("c", 0)))

    def __str__(self):
        if self.is_edge:
            return "legendre-edge"
        return f"{self.family}{self.params}"


def P(a=0, b=0, c=0) -> BasisTag:
    return BasisTag("P", (a, b, c))


def weightedP(a=0, b=0, c=0) -> BasisTag:
    return BasisTag("weightedP", (a, b, c))


def Q(a=0, b=0, c=0) -> BasisTag:
    return BasisTag("Q", (a, b, c))


EDGE = BasisTag("legendre-edge")


def _degree_from_length(n: int, edge: bool) -> int:
    if edge:
        return n - 1
    d = int(round((np.sqrt(8 * n + 1) - 3) / 2))
    if dof(d) != n:
        raise ValueError(f"length {n} is not a triangular number of coefficients")
    return d


class CoefficientVector:
    """Expansion coefficients ``f_{n,k}`` stored flat in degree-graded order."""

    def __init__(self, basis: BasisTag, values):
        self.basis = basis
        self.values = np.array(values, dtype=float).ravel()
        self.degree = _degree_from_length(self.values.size, basis is not None and basis.is_edge)

    @classmethod
    def from_blocks(cls, basis: BasisTag, blocks) -> "CoefficientVector":
        for n, blk in enumerate(blocks):
            expected = 1 if basis.is_edge else n + 1
            if len(blk) != expected:
                raise ValueError(f"block {n} has {len(blk)} entries, expected {expected}")
        flat = [v for blk in blocks for v in blk]
        return cls(basis, flat)

    @classmethod
    def zeros(cls, basis: BasisTag, degree: int) -> "CoefficientVector":
        return cls(basis, np.zeros(degree + 1 if basis.is_edge else dof(degree)))

    @classmethod
    def unit(cls, basis: BasisTag, degree: int, n: int, k: int = 0) -> "CoefficientVector":
        v = cls.zeros(basis, degree)
        v.values[n if basis.is_edge else dof(n - 1) + k] = 1.0
        return v

    @property
    def blocks(self) -> list:
        if self.basis.is_edge:
            return [self.values[i : i + 1] for i in range(self.values.size)]
        return [self.values[dof(n - 1) : dof(n)] for n in range(self.degree + 1)]

    def block_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(b) for b in self.blocks])

    def resize(self, degree: int) -> "CoefficientVector":
        """Zero-pad or cut to total degree ``degree``."""
        n = degree + 1 if self.basis.is_edge else dof(degree)
        out = np.zeros(n)
        m = min(n, self.values.size)
        out[:m] = self.values[:m]
        return CoefficientVector(self.basis, out)

    def trim(self, tol: float = 0.0) -> "CoefficientVector":
        """Drop trailing blocks whose entries are all ``<= tol`` in magnitude."""
        norms = [np.max(np.abs(b)) if b.size else 0.0 for b in self.blocks]
        keep = len(norms)
        while keep > 1 and norms[keep - 1] <= tol:
            keep -= 1
        return self.resize(keep - 1)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"CoefficientVector({self.basis}, degree={self.degree})"

    def to_json(self) -> dict:
        return {
            "basis": self.basis.to_json(),
            "degree": self.degree,
            "blocks": [[float(v) for v in b] for b in self.blocks],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CoefficientVector":
        basis = BasisTag.from_json(obj["basis"])
        vec = cls.from_blocks(basis, obj["blocks"])
        if "degree" in obj and int(obj["degree"]) != vec.degree:
            raise ValueError(f"degree field {obj['degree']} disagrees with {vec.degree} blocks")
        return vec


def write_coefficients(path, vec: CoefficientVector) -> None:
    Path(path).write_text(json.dumps(vec.to_json(), indent=1) + "\n")


def read_coefficients(path) -> CoefficientVector:
    return CoefficientVector.from_json(json.loads(Path(path).read_text()))
