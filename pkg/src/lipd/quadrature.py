"""Composite Gauss-Legendre rules for the Duhamel time integrals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class TimeQuadrature:
    """Panel layout for integrals over ``[t0, t1]``.

    ``panels`` uniform panels of ``order`` Gauss-Legendre points.  An end
    flagged as graded has its outermost panel replaced by ``grade_levels``
    geometrically shrinking panels (ratio ``grade_ratio``), which restores
    fast convergence for the ``sqrt(s)`` behaviour at ``s = 0`` and for the
    near-identity semigroup at ``s = tau*``.
    """

    panels: int = 16
    order: int = 8
    grade_levels: int = 12
    grade_ratio: float = 0.15

    def breakpoints(self, t0: float, t1: float, grade_left=False, grade_right=False) -> np.ndarray:
        if not t1 > t0:
            raise ValueError("need t1 > t0")
        edges = np.linspace(t0, t1, self.panels + 1)
        h = edges[1] - edges[0]
        geo = h * self.grade_ratio ** np.arange(1, self.grade_levels + 1)
        parts = [edges]
        if grade_left:
            parts.append(t0 + geo)
        if grade_right:
            parts.append(t1 - geo)
        return np.unique(np.concatenate(parts))

    def rule(self, t0: float, t1: float, grade_left=False, grade_right=False):
        """Nodes and weights of the composite rule on ``[t0, t1]``."""
        edges = self.breakpoints(t0, t1, grade_left, grade_right)
        x, w = _gauss_legendre(self.order)
        lo, hi = edges[:-1, None], edges[1:, None]
        nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        weights = 0.5 * (hi - lo) * w
        return nodes.ravel(), weights.ravel()
