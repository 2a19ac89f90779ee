"""Gauss-Legendre quadrature rules on subintervals of the unit interval.

The nodes are passed through the change of variables
``u = (1 - cos(pi t)) / 2`` before use.  The map keeps the node count and
polynomial order of the Legendre rule but clusters nodes quadratically at
both endpoints, which is what conditional-copula integrands need: their
boundary layers at u -> 0 and u -> 1 otherwise dominate the error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["QuadratureConfig", "DEFAULT_QUADRATURE", "unit_rule", "interval_rule"]


@dataclass(frozen=True)
class QuadratureConfig:
    """Number of Gauss-Legendre nodes used for integrals over (0, 1)."""

    nodes: int = 256

    def __post_init__(self) -> None:
        if self.nodes < 2:
            raise ValueError("quadrature needs at least 2 nodes")


DEFAULT_QUADRATURE = QuadratureConfig()


@lru_cache(maxsize=64)
def _mapped_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    u = 0.5 * (1.0 - np.cos(np.pi * t))
    du = 0.25 * np.pi * np.sin(np.pi * t) * w
    return u, du


def unit_rule(n: int = 256):
    """Nodes and weights integrating over (0, 1)."""
    return _mapped_rule(n)


def interval_rule(a: float, b: float, n: int = 256):
    """Nodes and weights integrating over (a, b); degenerate when a == b."""
    if b < a:
        raise ValueError("interval endpoints out of order")
    u, du = _mapped_rule(n)
    return a + (b - a) * u, (b - a) * du
