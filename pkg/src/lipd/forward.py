"""Forward solvers: base price, Duhamel map, nonlinear pricing PDE, linearization residual."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import fft as sfft
from scipy.linalg import solve_banded

from .kernels import (angular_frequencies, margin_nodes, padded_length, semigroup_multiplier,
                      weight_w)
from .model import (Field, Grid, ModelParams, ParameterError, derive_transformed, gauge_V_from_v,
                    payoff)
from .quadrature import TimeQuadrature

DEFAULT_GRID = Grid(-8.0, 8.0, 2048)
# odd node count puts a node on the payoff kink at y = 0
NONLINEAR_GRID = Grid(-8.0, 8.0, 1601)


class TruncationError(ParameterError):
    """Input support too close to the grid boundary for the truncated convolution."""


class StabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class DriftPerturbation:
    """Perturbation ``f`` of the drift with ``supp f`` inside ``[-L, inf)``."""

    f: Field
    L: float = 0.0

    def __post_init__(self):
        if self.L < 0:
            raise ParameterError("L must be nonnegative")
        left = self.f.y < -self.L - 1e-12
        if np.any(np.abs(self.f.values[left]) > 1e-14):
            raise ParameterError(f"perturbation does not vanish left of -L = {-self.L}")

    @property
    def grid(self) -> Grid:
        return self.f.grid


@dataclass(frozen=True)
class ForwardResult:
    v_final: Field
    snapshots: list = field(default_factory=list)


def bump(grid: Grid, center: float = 0.0, width: float = 1.0, amplitude: float = 1.0) -> Field:
    """Smooth compactly supported bump ``exp(1 - 1/(1 - t^2))`` on ``|t| < 1``."""
    t = (grid.nodes - center) / width
    vals = np.zeros(grid.n)
    inside = np.abs(t) < 1
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return Field(grid, vals)


def gaussian_bump(grid: Grid, center: float = 0.0, width: float = 0.5, amplitude: float = 1.0,
                  cutoff: float = 1e-16) -> Field:
    """Gaussian profile, set to exactly zero where it drops below ``cutoff * amplitude``."""
    vals = amplitude * np.exp(-0.5 * ((grid.nodes - center) / width) ** 2)
    vals[np.abs(vals) < cutoff * abs(amplitude)] = 0.0
    return Field(grid, vals)


# --- base solution ------------------------------------------------------------


def solve_base_U0(params: ModelParams, tau: float, grid: Grid) -> Field:
    """``U0(tau, .)`` for the constant drift ``mu0``; ``tau`` in years.

    The gauged payoff ``max(1 - exp(-y), 0)`` is propagated by ``U_a`` in
    closed form: ``exp(-x) K_a(t, y - x) = exp(-y) K_{a+1}(t, y - x)``, so
    ``U0 = exp(y - b0 tau) * (w_a(t, y) - exp(-y) w_{a+1}(t, y))``.
    """
    if tau < 0:
        raise ParameterError("tau must be nonnegative")
    y = grid.nodes
    if tau == 0:
        return Field(grid, payoff(y))
    tp = derive_transformed(params)
    t = params.time_scale * tau
    vals = np.exp(y - tp.b0 * tau) * weight_w(t, y, tp.a) - np.exp(-tp.b0 * tau) * weight_w(t, y, tp.a0)
    return Field(grid, vals)


# --- Duhamel map --------------------------------------------------------------


def _check_interior(values: np.ndarray, edge: int):
    scale = max(np.max(np.abs(values)), 1e-300)
    if np.any(np.abs(values[:edge]) > 1e-14 * scale) or np.any(np.abs(values[-edge:]) > 1e-14 * scale):
        raise TruncationError("perturbation support touches the grid boundary")


def _edge_nodes(grid: Grid) -> int:
    return max(2, grid.n // 64)


def duhamel_nodes(t0: float, t1: float, tau_star: float, quad: TimeQuadrature):
    """Quadrature nodes on ``[t0, t1]`` (normalized time), graded where needed."""
    return quad.rule(t0, t1, grade_left=(t0 == 0.0), grade_right=(t1 == tau_star))


def duhamel_integral(f_norm: np.ndarray, grid: Grid, a: float, tau_star: float, t0: float, t1: float,
                     quad: TimeQuadrature = TimeQuadrature(), weight=None) -> np.ndarray:
    """``int_{t0}^{t1} U_a(tau* - s)[w(s) f](y) ds`` in normalized time.

    ``weight(s, y)`` replaces ``w`` when given (e.g. ``w = 1`` diagnostics).
    """
    if not (0.0 <= t0 < t1 <= tau_star):
        raise ParameterError("need 0 <= t0 < t1 <= tau*")
    weight = weight or (lambda s, y: weight_w(s, y, a))
    s, c = duhamel_nodes(t0, t1, tau_star, quad)
    n, dy = grid.n, grid.dy
    N = padded_length(n, margin_nodes(tau_star, a, dy))
    xi = angular_frequencies(N, dy)
    y = grid.nodes
    acc = np.zeros(N, dtype=complex)
    for chunk in np.array_split(np.arange(s.size), max(1, s.size // 64)):
        src = weight(s[chunk, None], y[None, :]) * f_norm[None, :]
        spec = sfft.fft(src, n=N, axis=-1)
        acc += np.einsum("q,qk->k", c[chunk], semigroup_multiplier(tau_star - s[chunk], xi, a) * spec)
    out = sfft.ifft(acc)[:n]
    return out.real if not np.iscomplexobj(f_norm) else out


def duhamel_forward(f: DriftPerturbation, params: ModelParams, quad: TimeQuadrature = TimeQuadrature(),
                    weight=None) -> ForwardResult:
    """Gauged linear response ``v(tau*, .)`` to the drift perturbation ``f``.

    The time change leaves the values of ``v`` unchanged; internally the
    problem is solved for ``2 f / sigma0**2`` over ``[0, sigma0**2 tau* / 2]``.
    """
    grid = f.grid
    _check_interior(f.f.values, _edge_nodes(grid))
    tp = derive_transformed(params)
    f_norm = np.asarray(f.f.values) / params.time_scale
    vals = duhamel_integral(f_norm, grid, tp.a, tp.tau_norm, 0.0, tp.tau_norm, quad, weight)
    return ForwardResult(Field(grid, vals))


def forward_price_perturbation(f: DriftPerturbation, params: ModelParams,
                               quad: TimeQuadrature = TimeQuadrature()) -> Field:
    """Linearized price perturbation ``V(tau*, .)`` (ungauged)."""
    v = duhamel_forward(f, params, quad).v_final
    return gauge_V_from_v(v, params.tau_star, derive_transformed(params))


def split_I1_I2(f: DriftPerturbation, params: ModelParams, tau0: float,
                quad: TimeQuadrature = TimeQuadrature()):
    """Split of the Duhamel integral at ``tau0`` (years) into early and late parts."""
    if not 0 < tau0 < params.tau_star:
        raise ParameterError("tau0 must lie strictly between 0 and tau*")
    grid = f.grid
    _check_interior(f.f.values, _edge_nodes(grid))
    tp = derive_transformed(params)
    f_norm = np.asarray(f.f.values) / params.time_scale
    t0 = params.time_scale * tau0
    I1 = duhamel_integral(f_norm, grid, tp.a, tp.tau_norm, 0.0, t0, quad)
    I2 = duhamel_integral(f_norm, grid, tp.a, tp.tau_norm, t0, tp.tau_norm, quad)
    return Field(grid, I1), Field(grid, I2)


# --- nonlinear pricing PDE ----------------------------------------------------


def _asymptote_right(y, mu, r, tau):
    return math.exp(y + (mu - r) * tau) - math.exp(-r * tau)


def solve_nonlinear(mu: Field, params: ModelParams, nt: int = 400, theta: float = 0.5,
                    rannacher_steps: int = 2) -> Field:
    """``U(tau*, .)`` for the pricing PDE with space-dependent drift ``mu``.

    Theta scheme in time (Crank-Nicolson by default, with ``rannacher_steps``
    initial steps replaced by twice as many backward-Euler half steps to damp
    the payoff kink), centred second differences in space, Dirichlet data
    ``0`` on the left and the large-``y`` asymptote on the right.
    """
    grid = mu.grid
    if nt < 2:
        raise ParameterError("need nt >= 2")
    if not grid.has_node_at(0.0):
        raise ParameterError("grid must have a node at y = 0")
    dy = grid.dy
    dt = params.tau_star / nt
    alpha = 0.5 * params.sigma0**2
    if theta < 0.5 and dt > dy * dy / (2 * alpha) * 0.999:
        raise StabilityError(f"explicit step dt={dt:g} exceeds the stability limit {dy * dy / (2 * alpha):g}")
    y = grid.nodes
    m = np.real(np.asarray(mu.values, dtype=float))
    beta = alpha - m[1:-1]
    lower = alpha / dy**2 + beta / (2 * dy)
    upper = alpha / dy**2 - beta / (2 * dy)
    diag = -2 * alpha / dy**2 - params.r
    mu_right = float(m[-1])

    def apply_L(U):
        return lower * U[:-2] + diag * U[1:-1] + upper * U[2:]

    def step(U, tau_old, k, th):
        tau_new = tau_old + k
        gl, gr = 0.0, _asymptote_right(y[-1], mu_right, params.r, tau_new)
        rhs = U[1:-1] + (1 - th) * k * apply_L(U)
        rhs[0] += th * k * lower[0] * gl
        rhs[-1] += th * k * upper[-1] * gr
        ab = np.zeros((3, grid.n - 2))
        ab[0, 1:] = -th * k * upper[:-1]
        ab[1, :] = 1 - th * k * diag
        ab[2, :-1] = -th * k * lower[1:]
        out = np.empty_like(U)
        out[1:-1] = solve_banded((1, 1), ab, rhs)
        out[0], out[-1] = gl, gr
        return out

    U = payoff(y)
    tau = 0.0
    n_start = min(rannacher_steps, nt) if theta == 0.5 else 0
    for _ in range(2 * n_start):
        U = step(U, tau, dt / 2, 1.0)
        tau += dt / 2
    for i in range(nt - n_start):
        U = step(U, tau, dt, theta)
        tau = (n_start + i + 1) * dt
    return Field(grid, U)


class LinearizationResult(NamedTuple):
    norm_nu: float
    norm_f: float
    norm_V: float


def linearization_residual(f: DriftPerturbation, params: ModelParams, nt: int = 400,
                           window: tuple[float, float] = (-4.0, 4.0),
                           quad: TimeQuadrature = TimeQuadrature()) -> LinearizationResult:
    """Norms of ``nu = U - U0 - V`` on ``window``.

    ``U`` and ``U0`` come from the same finite-difference solver (drift
    ``mu0 + f`` and ``mu0``) so that their discretization errors cancel in
    the difference; ``V`` is the Duhamel response mapped back through the gauge.
    """
    grid = f.grid
    mu = Field(grid, params.mu0 + np.real(np.asarray(f.f.values)))
    U = solve_nonlinear(mu, params, nt)
    U0 = solve_nonlinear(Field(grid, np.full(grid.n, params.mu0)), params, nt)
    V = forward_price_perturbation(f, params, quad)
    nu = U - U0 - V
    return LinearizationResult(nu.norm(window), f.f.norm(), V.norm(window))
