"""Model parameters, grids, fields and the coordinate/gauge maps.

The pricing problem lives in firm-value coordinates ``(t, A, u)``.  Everything
numerical in this package runs in heat coordinates ``(tau, y, U)`` with
``y = log(A / D)``, ``tau = T - t`` and ``U = u / D``, after the gauge
``v = exp(-y + b0 * tau) * V`` and the time change ``tau_norm = sigma0**2 / 2 * tau``
that turns the pricing operator into ``d/dtau + H_a`` with unit diffusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised when model inputs fall outside their admissible domain."""


@dataclass(frozen=True)
class ModelParams:
    """Financial inputs.

    Parameters
    ----------
    sigma0 : float
        Constant volatility, per sqrt-year.
    mu0 : float
        Baseline real drift, per year.
    r : float
        Interest rate, per year.
    tau_star : float
        Time to maturity ``T - t*`` in years.
    debt : float
        Face value ``D`` of the firm's debt.
    """

    sigma0: float = 0.4
    mu0: float = 0.05
    r: float = 0.03
    tau_star: float = 1.0
    debt: float = 1.0

    def __post_init__(self):
        for name in ("sigma0", "mu0", "r", "tau_star", "debt"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.sigma0 <= 0:
            raise ParameterError("sigma0 must be positive")
        if self.tau_star <= 0:
            raise ParameterError("tau_star must be positive")
        if self.debt <= 0:
            raise ParameterError("debt must be positive")
        if self.r < 0:
            raise ParameterError("r must be nonnegative")

    @property
    def time_scale(self) -> float:
        """Factor ``sigma0**2 / 2`` converting years to normalized time."""
        return 0.5 * self.sigma0**2

    def transformed(self) -> "TransformedParams":
        return derive_transformed(self)


@dataclass(frozen=True)
class TransformedParams:
    a0: float
    b0: float
    a: float
    tau_norm: float


def derive_transformed(params: ModelParams) -> TransformedParams:
    """Gauge constants ``a0``, ``b0``, ``a = a0 - 1`` and the normalized horizon."""
    if not isinstance(params, ModelParams):
        raise ParameterError("expected ModelParams")
    s2 = params.sigma0 * params.sigma0
    a0 = (s2 - 2.0 * params.mu0) / (2.0 * s2)
    b0 = params.r + 0.5 * s2 * a0 * a0
    return TransformedParams(a0=a0, b0=b0, a=a0 - 1.0, tau_norm=0.5 * s2 * params.tau_star)


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid on ``[y_min, y_max]`` with ``n`` nodes."""

    y_min: float
    y_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError("grid needs n >= 2 nodes")
        if not (math.isfinite(self.y_min) and math.isfinite(self.y_max)):
            raise ParameterError("grid bounds must be finite")
        if not self.y_max > self.y_min:
            raise ParameterError("grid needs y_max > y_min")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.n)

    def trapezoid_weights(self) -> np.ndarray:
        wts = np.full(self.n, self.dy)
        wts[[0, -1]] *= 0.5
        return wts

    def index_of(self, y: float) -> int:
        """Index of the node nearest to ``y``."""
        return int(np.clip(round((y - self.y_min) / self.dy), 0, self.n - 1))

    def has_node_at(self, y: float, tol: float = 1e-12) -> bool:
        return abs(self.nodes[self.index_of(y)] - y) <= tol * max(1.0, abs(self.dy))

    @classmethod
    def from_nodes(cls, nodes, rtol: float = 1e-9) -> "Grid":
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ParameterError("need at least two nodes")
        grid = cls(float(nodes[0]), float(nodes[-1]), nodes.size)
        if np.max(np.abs(grid.nodes - nodes)) > rtol * max(1.0, np.max(np.abs(nodes))):
            raise ParameterError("nodes are not uniformly spaced")
        return grid


def _frozen(values) -> np.ndarray:
    arr = np.array(values)
    if not (np.issubdtype(arr.dtype, np.floating) or np.issubdtype(arr.dtype, np.complexfloating)):
        arr = arr.astype(float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Field:
    """Samples of a real or complex function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.shape != (self.grid.n,):
            raise ParameterError(f"field has {arr.shape} values for a grid of {self.grid.n} nodes")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, fn(grid.nodes))

    @classmethod
    def zeros(cls, grid: Grid, dtype=float) -> "Field":
        return cls(grid, np.zeros(grid.n, dtype=dtype))

    @property
    def y(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def norm(self, window: tuple[float, float] | None = None) -> float:
        """Trapezoid L2 norm, optionally restricted to ``window``."""
        wts = self.grid.trapezoid_weights()
        vals = np.abs(self.values) ** 2
        if window is not None:
            keep = (self.y >= window[0]) & (self.y <= window[1])
            wts, vals = wts[keep], vals[keep]
        return float(np.sqrt(np.sum(wts * vals)))

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__


def _check_same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise ParameterError("fields live on different grids")


def to_heat_coords(t, A, u, params: ModelParams, maturity: float):
    """Map ``(t, A, u)`` to ``(tau, y, U)``; ``maturity`` is ``T``."""
    A = np.asarray(A, dtype=float)
    if np.any(A <= 0):
        raise ParameterError("asset value must be positive")
    tau = maturity - np.asarray(t, dtype=float)
    y = np.log(A / params.debt)
    U = np.asarray(u, dtype=float) / params.debt
    return _scalarize(tau), _scalarize(y), _scalarize(U)


def from_heat_coords(tau, y, U, params: ModelParams, maturity: float):
    """Inverse of :func:`to_heat_coords`."""
    t = maturity - np.asarray(tau, dtype=float)
    A = params.debt * np.exp(np.asarray(y, dtype=float))
    u = params.debt * np.asarray(U, dtype=float)
    return _scalarize(t), _scalarize(A), _scalarize(u)


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def gauge_v_from_V(V: Field, tau: float, tp: TransformedParams) -> Field:
    """``v = exp(-y + b0 tau) V`` with ``tau`` in years."""
    return V.with_values(np.exp(-V.y + tp.b0 * tau) * V.values)


def gauge_V_from_v(v: Field, tau: float, tp: TransformedParams) -> Field:
    return v.with_values(np.exp(v.y - tp.b0 * tau) * v.values)


def rescale_time(tau, f: Field, params: ModelParams):
    """Normalize time to unit diffusion.

    Returns ``(sigma0**2 / 2 * tau, 2 / sigma0**2 * f)``; with these the gauged
    linear problem reads ``(d/dtau + H_a) v = f w``.
    """
    s = params.time_scale
    return s * tau, f * (1.0 / s)


def payoff(y) -> np.ndarray:
    """Normalized call payoff ``max(exp(y) - 1, 0)``."""
    return np.maximum(np.expm1(y), 0.0)
