"""Named functions usable from problem spec files.

Triangle functions take physical ``(x, y)``; edge functions take the edge
parameter ``s`` in ``[0, 1]``.  Triangle functions are also accepted as
boundary data, in which case they are sampled along each edge.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

__all__ = ["FUNCTIONS", "EDGE_FUNCTIONS", "lookup", "lookup_edge"]


def _erf_bump(x, y):
    return 1 + erf(5 * (1 - 10 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)))


def _gaussian_bump(x, y):
    return np.exp(-30 * ((x - 1 / 3) ** 2 + (y - 1 / 3) ** 2))


FUNCTIONS = {
    "zero": lambda x, y: np.zeros_like(np.asarray(x, dtype=float) + y),
    "one": lambda x, y: np.ones_like(np.asarray(x, dtype=float) + y),
    "erf-bump": _erf_bump,
    "gaussian-bump": _gaussian_bump,
    "xy-exp": lambda x, y: x * y * np.exp(x),
    "helmholtz-v": lambda x, y: 1 - (3 * (x - 1) ** 2 + 5 * y**2),
    "exp-cos": lambda x, y: np.exp(x) * np.cos(y),
    "x-squared": lambda x, y: x**2 + 0 * y,
    "xy2": lambda x, y: x * y**2,
}

EDGE_FUNCTIONS = {
    "transport-c1-bottom": lambda s: s * (1 - s) * np.exp(s),
    "transport-c2-bottom": lambda s: s * np.exp(s - 1),
    "transport-c2-hypotenuse": lambda s: s,
    "transport-cm1-bottom": lambda s: (1 - s) * np.exp(s),
    "transport-cm1-left": lambda s: 1 - s,
}


def lookup(name: str):
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown builtin function {name!r}; known: {sorted(FUNCTIONS)}") from None


def lookup_edge(name: str, edge: str | None = None):
    """Edge function by name; a triangle function is sampled along ``edge``."""
    if name in EDGE_FUNCTIONS:
        return EDGE_FUNCTIONS[name]
    f = lookup(name)
    if edge is None:
        raise KeyError(f"{name!r} is a triangle function; an edge is needed to sample it")
    from .dirichlet import edge_points

    return lambda s: f(*edge_points(edge, s))
