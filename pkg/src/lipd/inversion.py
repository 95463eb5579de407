"""Discretized forward operator, Tikhonov reconstruction and injectivity diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import optimize

from .forward import duhamel_nodes
from .kernels import angular_frequencies, margin_nodes, padded_length, semigroup_multiplier, weight_w
from .model import Field, Grid, ModelParams, ParameterError, derive_transformed
from .quadrature import TimeQuadrature

MAX_NODES = 8192


class InversionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ForwardMatrix:
    """Dense matrix of the linear map ``f -> v(tau*, .)`` restricted to an observation mask.

    Rows are observation nodes (``mask``), columns are the unknown nodes
    (``support``); ``obs_weights``/``dom_weights`` are the trapezoid weights
    that define the discrete L2 inner products on both sides.
    """

    A: np.ndarray
    grid: Grid
    mask: np.ndarray
    support: np.ndarray
    obs_weights: np.ndarray
    dom_weights: np.ndarray

    @property
    def shape(self):
        return self.A.shape

    def scaled(self) -> np.ndarray:
        """Matrix in orthonormal coordinates ``W_obs^1/2 A W_dom^-1/2``."""
        return np.sqrt(self.obs_weights)[:, None] * self.A / np.sqrt(self.dom_weights)[None, :]

    def apply(self, f: Field) -> np.ndarray:
        return self.A @ np.asarray(f.values)[self.support]

    def embed(self, coeffs: np.ndarray) -> Field:
        vals = np.zeros(self.grid.n, dtype=np.result_type(coeffs, float))
        vals[self.support] = coeffs
        return Field(self.grid, vals)


def _interval_weights(idx: np.ndarray, dy: float) -> np.ndarray:
    """Trapezoid weights over each contiguous run of selected nodes."""
    wts = np.full(idx.size, dy)
    if idx.size:
        breaks = np.flatnonzero(np.diff(idx) != 1)
        starts = np.r_[0, breaks + 1]
        ends = np.r_[breaks, idx.size - 1]
        wts[starts] *= 0.5
        wts[ends] *= 0.5
    return wts


def assemble_forward_matrix(params: ModelParams, grid: Grid, mask=None, support_min: float | None = None,
                            quad: TimeQuadrature = TimeQuadrature()) -> ForwardMatrix:
    """Assemble the dense Duhamel operator on ``grid``.

    Column ``j`` is the response to the unit nodal vector at ``y_j``, so the
    matrix reproduces :func:`lipd.forward.duhamel_forward` exactly up to
    rounding.  ``support_min`` restricts the unknown to ``y >= support_min``.
    """
    n = grid.n
    if n > MAX_NODES:
        raise ParameterError(f"dense assembly limited to {MAX_NODES} nodes, got {n}")
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (n,) or not mask.any():
        raise ParameterError("mask must be a nonempty boolean array over the grid")
    y = grid.nodes
    support = np.ones(n, dtype=bool) if support_min is None else y >= support_min - 1e-12
    tp = derive_transformed(params)
    T, a, dy = tp.tau_norm, tp.a, grid.dy
    s, c = duhamel_nodes(0.0, T, T, quad)
    N = padded_length(n, margin_nodes(T, a, dy))
    xi = angular_frequencies(N, dy)
    offsets = np.r_[np.arange(n), np.arange(N - n + 1, N)]  # lags 0..n-1, -(n-1)..-1
    B = np.zeros((offsets.size, n))
    for chunk in np.array_split(np.arange(s.size), max(1, s.size // 32)):
        kern = sfft.ifft(semigroup_multiplier(T - s[chunk], xi, a), axis=-1).real[:, offsets]
        B += (kern * c[chunk, None]).T @ weight_w(s[chunk, None], y[None, :], a)
    B /= params.time_scale
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    A = B[np.where(lag >= 0, lag, lag + offsets.size), np.arange(n)[None, :]]
    obs_idx, dom_idx = np.flatnonzero(mask), np.flatnonzero(support)
    return ForwardMatrix(A=A[np.ix_(obs_idx, dom_idx)], grid=grid, mask=mask, support=support,
                         obs_weights=_interval_weights(obs_idx, dy),
                         dom_weights=_interval_weights(dom_idx, dy))


def adjoint_apply(Amat: ForwardMatrix, g) -> np.ndarray:
    """Adjoint with respect to the trapezoid inner products on both sides."""
    g = np.asarray(g.values if isinstance(g, Field) else g)
    if g.shape == (Amat.grid.n,):
        g = g[Amat.mask]
    if g.shape != (Amat.A.shape[0],):
        raise ParameterError(f"expected {Amat.A.shape[0]} observation values, got {g.shape}")
    return (Amat.A.T @ (Amat.obs_weights * g)) / Amat.dom_weights


@dataclass
class InversionReport:
    f_hat: Field
    lam: float
    residual: float
    singular_values: np.ndarray
    condition: float
    method: str = "fixed"
    noise_norm: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "residual": self.residual, "condition": self.condition,
                "method": self.method, "noise_norm": self.noise_norm,
                "sigma_max": float(self.singular_values[0]), "sigma_min": float(self.singular_values[-1]),
                **self.diagnostics}


class _SVDSystem:
    def __init__(self, Amat: ForwardMatrix, v_obs: np.ndarray):
        self.Amat = Amat
        self.U, self.s, self.Vt = np.linalg.svd(Amat.scaled(), full_matrices=False)
        self.b = np.sqrt(Amat.obs_weights) * v_obs
        self.beta = self.U.T @ self.b
        self.b_perp2 = max(float(self.b @ self.b - self.beta @ self.beta), 0.0)

    def coeffs(self, lam: float) -> np.ndarray:
        return self.Vt.T @ (self.s / (self.s**2 + lam) * self.beta)

    def residual(self, lam: float) -> float:
        r = lam / (self.s**2 + lam) * self.beta
        return math.sqrt(float(r @ r) + self.b_perp2)


def observed_values(Amat: ForwardMatrix, v_obs) -> np.ndarray:
    v = np.asarray(v_obs.values if isinstance(v_obs, Field) else v_obs, dtype=float)
    if v.shape == (Amat.grid.n,):
        v = v[Amat.mask]
    if v.shape != (Amat.A.shape[0],):
        raise ParameterError("observation does not match the matrix rows")
    return v


def tikhonov_solve(Amat: ForwardMatrix, v_obs, lam: float | str = "auto", noise_norm: float | None = None,
                   safety: float = 1.1, lam_bounds=(1e-14, 1e2), iters: int = 200) -> InversionReport:
    """Minimize ``||A f - v||^2 + lam ||f||^2`` (discrete L2 norms) via the SVD.

    With ``lam='auto'`` the weight is chosen by Morozov's discrepancy
    principle, ``||A f - v|| = safety * noise_norm``, solving for ``log lam``
    with Brent's method over ``lam_bounds`` times ``sigma_1**2``.
    """
    v = observed_values(Amat, v_obs)
    sys = _SVDSystem(Amat, v)
    s1 = float(sys.s[0])
    diagnostics = {}
    if lam == "auto":
        if noise_norm is None or noise_norm <= 0:
            raise ParameterError("automatic lambda needs a positive noise norm")
        target = safety * noise_norm
        lo, hi = math.log(lam_bounds[0] * s1**2), math.log(lam_bounds[1] * s1**2)
        r_lo, r_hi = sys.residual(math.exp(lo)), sys.residual(math.exp(hi))
        diagnostics.update(target=target, residual_at_min=r_lo, residual_at_max=r_hi)
        if r_lo > target:
            diagnostics["discrepancy"] = "unreachable: residual exceeds target at smallest lambda"
            lam_val = math.exp(lo)
        elif r_hi < target:
            diagnostics["discrepancy"] = "unreachable: residual below target at largest lambda"
            lam_val = math.exp(hi)
        else:
            # the residual increases monotonically with lambda
            lam_val = math.exp(optimize.brentq(lambda t: sys.residual(math.exp(t)) - target, lo, hi,
                                               xtol=1e-10, maxiter=iters))
            diagnostics["discrepancy"] = "met"
        method = "discrepancy"
    else:
        lam_val = float(lam)
        if not lam_val > 0:
            raise ParameterError("lambda must be positive")
        method = "fixed"
    coeffs = sys.coeffs(lam_val) / np.sqrt(Amat.dom_weights)
    if not np.all(np.isfinite(coeffs)):
        raise InversionError("Tikhonov solve produced non-finite values")
    return InversionReport(f_hat=Amat.embed(coeffs), lam=lam_val, residual=sys.residual(lam_val),
                           singular_values=sys.s, condition=s1 / float(sys.s[-1]) if sys.s[-1] > 0 else math.inf,
                           method=method, noise_norm=noise_norm, diagnostics=diagnostics)


def noise_norm_estimate(Amat: ForwardMatrix, std: float) -> float:
    """Expected discrete L2 norm of i.i.d. noise of standard deviation ``std`` on the mask."""
    return std * math.sqrt(float(np.sum(Amat.obs_weights)))


def add_noise(v: np.ndarray, level: float, seed: int):
    """Additive Gaussian noise with std ``level * max|v|``; returns ``(noisy, std)``."""
    rng = np.random.default_rng(seed)
    std = level * float(np.max(np.abs(v)))
    return v + std * rng.standard_normal(np.shape(v)), std


def injectivity_certificate(Amat: ForwardMatrix, thresholds=(1e-8, 1e-12)) -> dict:
    """Singular spectrum summary of the assembled operator."""
    s = np.linalg.svd(Amat.scaled(), compute_uv=False)
    k = np.arange(1, s.size + 1)
    tail = slice(s.size // 4, s.size)
    pos = s[tail] > 0
    slope = float(np.polyfit(np.log10(k[tail][pos]), np.log10(s[tail][pos]), 1)[0]) if pos.sum() > 2 else math.nan
    return {
        "n_unknowns": int(s.size),
        "sigma_max": float(s[0]),
        "sigma_min": float(s[-1]),
        "injective": bool(s[-1] > 0),
        "condition": float(s[0] / s[-1]) if s[-1] > 0 else math.inf,
        "numerical_rank": {f"{t:g}": int(np.sum(s > t * s[0])) for t in thresholds},
        "loglog_tail_slope": slope,
        "singular_values": s,
    }
