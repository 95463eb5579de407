"""FBI transform, semiclassical Fourier transform and exponential-decay diagnostics.

Conventions (one space dimension)::

    Tu(x, xi; h) = (2 pi h)^(-1/2) (pi h)^(-1/4) int exp(i (x - y) xi / h - (x - y)^2 / (2h)) u(y) dy
    F_h u(xi)    = (2 pi h)^(-1/2) int exp(-i x xi / h) u(x) dx

Region norms are computed in log space so that rates stay measurable long
after the norms themselves would underflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import special, stats

from .model import Field, Grid, ParameterError

DEFAULT_H_LIST = (0.2, 0.1, 0.05, 0.025)
R2_MIN = 0.98
NORM_FLOOR = 1e-300
WINDOW_RADIUS = 8.0  # in units of sqrt(h); Gaussian tail exp(-32)


class FBIOverflowError(OverflowError):
    pass


@dataclass(frozen=True)
class PhaseGrid:
    x: np.ndarray
    xi: np.ndarray
    h: float

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise ParameterError("h must lie in (0, 1]")
        for name in ("x", "xi"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 2:
                raise ParameterError(f"{name} needs at least two nodes")
            d = np.diff(arr)
            if not np.all(np.isfinite(arr)) or np.any(d <= 0) or np.ptp(d) > 1e-9 * max(1.0, abs(d[0])):
                raise ParameterError(f"{name} nodes must be uniform and increasing")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, x_range, xi_range, h: float, nx: int | None = None, nxi: int | None = None,
                per_sqrt_h: float = 6.0) -> "PhaseGrid":
        """Uniform phase grid; default spacing is ``sqrt(h) / per_sqrt_h``."""
        step = math.sqrt(h) / per_sqrt_h
        nx = nx or max(2, int(math.ceil((x_range[1] - x_range[0]) / step)) + 1)
        nxi = nxi or max(2, int(math.ceil((xi_range[1] - xi_range[0]) / step)) + 1)
        return cls(np.linspace(*x_range, nx), np.linspace(*xi_range, nxi), h)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dxi(self) -> float:
        return float(self.xi[1] - self.xi[0])

    def weights(self) -> np.ndarray:
        wx = np.full(self.x.size, self.dx)
        wx[[0, -1]] *= 0.5
        wxi = np.full(self.xi.size, self.dxi)
        wxi[[0, -1]] *= 0.5
        return wx[:, None] * wxi[None, :]


@dataclass(frozen=True)
class PhaseField:
    grid: PhaseGrid
    values: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.grid.x.size, self.grid.xi.size):
            raise ParameterError("phase field shape does not match its grid")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("phase field has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def log_norm(self, mask: np.ndarray | None = None) -> float:
        """Log of the trapezoid L2 norm, optionally over a boolean mask."""
        return 0.5 * _log_weighted_sum(np.abs(self.values) ** 2, self.grid.weights(), mask)

    def norm(self, mask: np.ndarray | None = None) -> float:
        return math.exp(self.log_norm(mask))


def _log_weighted_sum(sq: np.ndarray, wts: np.ndarray, mask=None) -> float:
    sel = sq > 0
    if mask is not None:
        sel &= mask
    if not sel.any():
        return -math.inf
    return float(special.logsumexp(np.log(sq[sel]) + np.log(wts[sel])))


def fbi_transform(u: Field, pg: PhaseGrid, boundary_tol: float = 1e-10) -> PhaseField:
    """``Tu`` on the phase grid by direct windowed quadrature over ``y``."""
    h = pg.h
    y = u.grid.nodes
    # the y-quadrature cannot tell xi from xi - 2 pi h / dy
    nyquist = math.pi * h / u.grid.dy
    if np.max(np.abs(pg.xi)) > nyquist * (1 + 1e-12):
        raise ParameterError(f"phase grid reaches |xi| = {np.max(np.abs(pg.xi)):g} beyond the sampling limit "
                             f"pi h / dy = {nyquist:g}; refine the y-grid or narrow the xi range")
    wy = u.grid.trapezoid_weights()
    vals = np.asarray(u.values)
    radius = WINDOW_RADIUS * math.sqrt(h)
    edge = 5.0 * math.sqrt(h)
    total = float(np.sum(wy * np.abs(vals) ** 2))
    near = (y < y[0] + edge) | (y > y[-1] - edge)
    boundary_mass = float(np.sum(wy[near] * np.abs(vals[near]) ** 2)) / total if total > 0 else 0.0
    if boundary_mass > boundary_tol:
        warnings.warn(f"FBI transform: {boundary_mass:.2e} of the mass sits within 5 sqrt(h) of the grid edge",
                      stacklevel=2)
    out = np.zeros((pg.x.size, pg.xi.size), dtype=complex)
    keep = np.flatnonzero(vals != 0)
    if keep.size:
        lo, hi = keep[0], keep[-1] + 1
        y, wy, vals = y[lo:hi], wy[lo:hi], vals[lo:hi]
        phase_y = np.exp(-1j * np.outer(y, pg.xi) / h)
        for rows in np.array_split(np.arange(pg.x.size), max(1, pg.x.size // 64)):
            d = pg.x[rows, None] - y[None, :]
            win = np.where(np.abs(d) <= radius, np.exp(-d * d / (2 * h)), 0.0)
            out[rows] = (win * (wy * vals)[None, :]) @ phase_y
        out *= np.exp(1j * np.outer(pg.x, pg.xi) / h)
        out *= (2 * math.pi * h) ** -0.5 * (math.pi * h) ** -0.25
    meta = {"h": h, "window_radius": radius, "window_tail": math.exp(-WINDOW_RADIUS**2 / 2),
            "boundary_mass": boundary_mass}
    return PhaseField(pg, out, meta)


def coherent_state(grid: Grid, h: float, x0: float = 0.0, xi0: float = 0.0) -> Field:
    """Unit-norm Gaussian ``(pi h)^(-1/4) exp(-(y - x0)^2 / 2h + i xi0 y / h)``."""
    y = grid.nodes
    vals = (math.pi * h) ** -0.25 * np.exp(-((y - x0) ** 2) / (2 * h))
    if xi0:
        vals = vals * np.exp(1j * xi0 * y / h)
    return Field(grid, vals)


# --- semiclassical Fourier transform -------------------------------------------


def fourier_grid(grid: Grid, h: float, pad: int = 1) -> Grid:
    """Frequency grid matching the FFT of ``grid`` padded to ``pad * n`` nodes."""
    N = pad * grid.n
    dxi = 2 * math.pi * h / (N * grid.dy)
    k0 = -(N // 2)
    return Grid(k0 * dxi, (k0 + N - 1) * dxi, N)


def semiclassical_fourier(u: Field, h: float, xi=None, pad: int = 1) -> Field:
    """``F_h u``.

    Without ``xi`` the transform is evaluated on :func:`fourier_grid` by FFT,
    which is exactly unitary for the discrete sums; an explicit ``xi`` array
    is evaluated by direct quadrature.
    """
    if not h > 0:
        raise ParameterError("h must be positive")
    g = u.grid
    vals = np.asarray(u.values)
    if xi is not None:
        xi = np.asarray(xi, dtype=float)
        wy = g.trapezoid_weights()
        out = (2 * math.pi * h) ** -0.5 * (np.exp(-1j * np.outer(xi, g.nodes) / h) @ (wy * vals))
        return Field(Grid.from_nodes(xi), out)
    xg = fourier_grid(g, h, pad)
    N = xg.n
    spec = sfft.fftshift(sfft.fft(vals, n=N))
    out = (2 * math.pi * h) ** -0.5 * g.dy * np.exp(-1j * g.y_min * xg.nodes / h) * spec
    return Field(xg, out)


def inverse_semiclassical_fourier(F: Field, h: float, grid: Grid) -> Field:
    """Exact inverse of :func:`semiclassical_fourier` for ``pad=1`` grids."""
    xg = fourier_grid(grid, h)
    if F.grid.n != xg.n or abs(F.grid.y_min - xg.y_min) > 1e-9 * max(1.0, abs(xg.y_min)) \
            or abs(F.grid.dy - xg.dy) > 1e-9 * xg.dy:
        raise ParameterError("F is not sampled on the Fourier grid of the target grid")
    spec = np.asarray(F.values) * np.exp(1j * grid.y_min * xg.nodes / h) / ((2 * math.pi * h) ** -0.5 * grid.dy)
    return Field(grid, sfft.ifft(sfft.ifftshift(spec)))


def fbi_fourier_identity_check(u: Field, pg: PhaseGrid, pad: int = 4) -> float:
    """``max |Tu(x, xi) - exp(i x xi / h) T[F_h u](xi, -x)|`` over the phase grid."""
    h = pg.h
    lhs = fbi_transform(u, pg).values
    v = semiclassical_fourier(u, h, pad=pad)
    swapped = PhaseGrid(pg.xi, -pg.x[::-1], h)
    tv = fbi_transform(v, swapped).values[:, ::-1].T  # indexed (x, xi)
    rhs = np.exp(1j * np.outer(pg.x, pg.xi) / h) * tv
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def weighted_transform(u: Field, pg: PhaseGrid, psi: Callable, eps: float) -> PhaseField:
    """``T^eps u = exp(eps psi(xi) / h) Tu``."""
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    expo = eps * np.asarray(psi(pg.xi), dtype=float) / pg.h
    if np.max(np.abs(expo), initial=0.0) > 700:
        raise FBIOverflowError("eps * psi / h exceeds 700; rescale eps or h")
    base = fbi_transform(u, pg)
    return PhaseField(pg, base.values * np.exp(expo)[None, :], {**base.meta, "eps": eps})


# --- regions and exact marginals ------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Phase-space box ``[x_lo, x_hi] x [xi_lo, xi_hi]``.

    With ``xi_abs`` the frequency condition reads ``xi_lo <= |xi| <= xi_hi``.
    Infinite bounds are allowed.
    """

    x_lo: float = -math.inf
    x_hi: float = math.inf
    xi_lo: float = -math.inf
    xi_hi: float = math.inf
    xi_abs: bool = False

    def contains(self, x, xi):
        x, xi = np.asarray(x), np.asarray(xi)
        xv = np.abs(xi) if self.xi_abs else xi
        return (x >= self.x_lo) & (x <= self.x_hi) & (xv >= self.xi_lo) & (xv <= self.xi_hi)

    def x_intervals(self):
        return [(self.x_lo, self.x_hi)]

    def xi_intervals(self):
        if not self.xi_abs:
            return [(self.xi_lo, self.xi_hi)]
        lo = max(self.xi_lo, 0.0)
        if lo == 0.0:
            return [(-self.xi_hi, self.xi_hi)]
        return [(-self.xi_hi, -lo), (lo, self.xi_hi)]

    @property
    def all_xi(self) -> bool:
        return math.isinf(self.xi_hi) and (self.xi_lo <= 0 if self.xi_abs else math.isinf(self.xi_lo))

    @property
    def all_x(self) -> bool:
        return math.isinf(self.x_lo) and math.isinf(self.x_hi)


def _log_gauss_interval(lo, hi):
    """``log(Phi(hi) - Phi(lo))`` elementwise, accurate in both tails."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    la, lb = special.log_ndtr(a), special.log_ndtr(b)
    with np.errstate(divide="ignore"):
        return lb + np.log1p(-np.exp(la - lb))


def log_marginal_norm(u: Field, h: float, intervals) -> float:
    """Log of ``||Tu||_{L2(X x R)}`` for ``X`` a union of position intervals.

    Integrating ``|Tu|^2`` over all frequencies leaves
    ``(pi h)^(-1/2) int_X int exp(-(x - y)^2 / h) |u(y)|^2 dy dx``; the
    ``x``-integral of the Gaussian is done in closed form.
    """
    y = u.grid.nodes
    sq = np.abs(np.asarray(u.values)) ** 2
    wy = u.grid.trapezoid_weights()
    nz = sq > 0
    if not nz.any():
        return -math.inf
    scale = math.sqrt(h / 2)
    terms = []
    for lo, hi in intervals:
        lg = _log_gauss_interval((lo - y[nz]) / scale, (hi - y[nz]) / scale)
        terms.append(lg + np.log(sq[nz]) + np.log(wy[nz]))
    return 0.5 * float(special.logsumexp(np.concatenate(terms)))


def log_region_norm(u: Field, h: float, region: Region, pg: PhaseGrid | None = None, pad: int = 1) -> float:
    """Log of ``||Tu||_{L2(region)}``.

    Regions unbounded in one variable use the exact marginal in the other
    (the frequency side through ``F_h``); bounded boxes are integrated on a
    phase grid covering the box.
    """
    if region.all_xi:
        return log_marginal_norm(u, h, region.x_intervals())
    if region.all_x:
        return log_marginal_norm(semiclassical_fourier(u, h, pad=pad), h, region.xi_intervals())
    if pg is None:
        xs = _finite_range(region.x_lo, region.x_hi, u.grid.y_min, u.grid.y_max)
        xis = _finite_range(-region.xi_hi if region.xi_abs else region.xi_lo, region.xi_hi, -3.0, 3.0)
        pg = PhaseGrid.uniform(xs, xis, h)
    tu = fbi_transform(u, pg)
    X, XI = np.meshgrid(pg.x, pg.xi, indexing="ij")
    return tu.log_norm(region.contains(X, XI))


def _finite_range(lo, hi, dflt_lo, dflt_hi):
    return (lo if math.isfinite(lo) else dflt_lo, hi if math.isfinite(hi) else dflt_hi)


# --- decay fits ------------------------------------------------------------------


@dataclass
class DecayFit:
    h_list: np.ndarray
    log_norms: np.ndarray
    delta: float
    intercept: float
    r2: float
    status: str
    used: np.ndarray | None = None  # points entering the regression

    @property
    def norms(self) -> np.ndarray:
        return np.exp(self.log_norms)

    @property
    def conclusive(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {"h_list": [float(h) for h in self.h_list], "log_norms": [float(v) for v in self.log_norms],
                "delta": self.delta, "intercept": self.intercept, "r2": self.r2, "status": self.status}

    @property
    def decays(self) -> bool:
        """Positive rate backed by a conclusive fit, a floor bound or underflow."""
        return self.delta > 0 and self.status in ("ok", "floor", "underflow")


def fit_decay(h_list: Sequence[float], log_norms: Sequence[float], r2_min: float = R2_MIN,
              log_floor=None, log_ref: float = 0.0) -> DecayFit:
    """Fit ``log norm = c - delta / h``.

    Points below ``log_floor`` (the rounding floor of the transform) are
    left out of the regression.  With fewer than three resolved points the
    status is ``'floor'`` and ``delta`` is the lower bound
    ``max h * (log_ref - log_floor)`` over the floored values of ``h``.
    """
    h = np.asarray(h_list, dtype=float)
    ln = np.asarray(log_norms, dtype=float)
    if h.size < 3:
        raise ParameterError("decay fit needs at least three values of h")
    if np.any(~np.isfinite(ln)):
        return DecayFit(h, ln, math.inf, -math.inf, math.nan, "underflow")
    used = np.ones(h.size, dtype=bool)
    if log_floor is not None:
        floor = np.broadcast_to(np.asarray(log_floor, dtype=float), h.shape)
        used = ln >= floor
        if used.sum() < 3:
            delta = float(np.max(h[~used] * (log_ref - floor[~used])))
            return DecayFit(h, ln, delta, math.nan, math.nan, "floor", used)
    res = stats.linregress(-1.0 / h[used], ln[used])
    r2 = float(res.rvalue**2) if np.ptp(ln[used]) > 0 else 1.0
    status = "ok" if r2 >= r2_min else "inconclusive"
    return DecayFit(h, ln, float(res.slope), float(res.intercept), r2, status, used)


def decay_fit(source, region, h_list: Sequence[float] = DEFAULT_H_LIST, grid_factory=None) -> DecayFit:
    """Exponential rate of ``||Tu||_{L2(region)}`` as ``h -> 0``.

    ``source`` is a :class:`Field` or a callable ``h -> Field`` (families that
    depend on ``h``); ``region`` is a :class:`Region` or a predicate
    ``(x, xi) -> bool`` which then needs ``grid_factory(h) -> PhaseGrid``.
    """
    logs = []
    for h in h_list:
        u = source(h) if callable(source) else source
        if isinstance(region, Region):
            pg = grid_factory(h) if grid_factory else None
            logs.append(log_region_norm(u, h, region, pg))
        else:
            if grid_factory is None:
                raise ParameterError("predicate regions need a phase-grid factory")
            pg = grid_factory(h)
            X, XI = np.meshgrid(pg.x, pg.xi, indexing="ij")
            logs.append(fbi_transform(u, pg).log_norm(np.asarray(region(X, XI), dtype=bool)))
    return fit_decay(h_list, logs)


@dataclass
class Tile:
    x_lo: float
    x_hi: float
    xi_lo: float
    xi_hi: float
    fit: DecayFit

    def row(self) -> dict:
        return {"x_lo": self.x_lo, "x_hi": self.x_hi, "xi_lo": self.xi_lo, "xi_hi": self.xi_hi,
                "delta": self.fit.delta, "r2": self.fit.r2}


def tile_edges(lo: float, hi: float, size: float) -> np.ndarray:
    n = max(1, int(round((hi - lo) / size)))
    return np.linspace(lo, hi, n + 1)


def wavefront_scan(source, h_list: Sequence[float] = DEFAULT_H_LIST, x_range=(-2.25, 2.25),
                   xi_range=(0.5, 3.0), tile: float = 0.5, symmetric_xi: bool = True,
                   floor_rel: float = 1e-12) -> list[Tile]:
    """Fit decay rates on a tiling of phase space.

    ``xi_range`` should stay away from ``xi = 0``, which is not part of the
    wave front set.  With ``symmetric_xi`` the mirrored tiles are scanned too.
    Tile norms below ``floor_rel`` times the window norm are treated as
    rounding noise (see :func:`fit_decay`).
    """
    xe = tile_edges(*x_range, tile)
    bands = [tile_edges(*xi_range, tile)]
    if symmetric_xi:
        bands.append(-bands[0][::-1])
    logs, floors, refs = {}, [], []
    for h in h_list:
        u = source(h) if callable(source) else source
        xi_lo = min(b[0] for b in bands)
        xi_hi = max(b[-1] for b in bands)
        pg = PhaseGrid.uniform(x_range, (xi_lo, xi_hi), h)
        tu = fbi_transform(u, pg)
        wts = pg.weights()
        sq = np.abs(tu.values) ** 2
        floors.append(math.log(floor_rel) + 0.5 * _log_weighted_sum(sq, wts))
        refs.append(math.log(u.norm()) if u.norm() > 0 else 0.0)
        X, XI = np.meshgrid(pg.x, pg.xi, indexing="ij")
        for xe_lo, xe_hi in zip(xe[:-1], xe[1:]):
            for band in bands:
                for k_lo, k_hi in zip(band[:-1], band[1:]):
                    mask = (X >= xe_lo) & (X <= xe_hi) & (XI >= k_lo) & (XI <= k_hi)
                    logs.setdefault((xe_lo, xe_hi, k_lo, k_hi), []).append(0.5 * _log_weighted_sum(sq, wts, mask))
    ref = max(refs)
    return [Tile(*key, fit_decay(h_list, vals, log_floor=floors, log_ref=ref)) for key, vals in logs.items()]


# --- support-separation checks -------------------------------------------------------


@dataclass
class BoundReport:
    h_list: list
    log_ratios: list  # log(||Tu||^2_region / ||u||^2)
    predicted_log: list  # log of the predicted suppression exp(-sigma^2 / 2h)
    constant: float  # smallest C with ratio <= C * prediction over h_list
    fit: DecayFit | None
    holds: bool

    def to_dict(self) -> dict:
        return {"h_list": self.h_list, "log_ratios": self.log_ratios, "predicted_log": self.predicted_log,
                "constant": self.constant, "fit": self.fit.to_dict() if self.fit else None, "holds": self.holds}


def _bound_report(log_sq_region, log_sq_total, h_list, sigma, c_max):
    if all(math.isinf(v) for v in log_sq_total):
        return BoundReport(list(h_list), [-math.inf] * len(h_list), [-sigma**2 / (2 * h) for h in h_list],
                           0.0, None, True)
    ratios = [r - t for r, t in zip(log_sq_region, log_sq_total)]
    pred = [-sigma**2 / (2 * h) for h in h_list]
    const = math.exp(max(r - p for r, p in zip(ratios, pred)))
    fit = fit_decay(h_list, [0.5 * r for r in ratios]) if len(h_list) >= 3 else None
    return BoundReport(list(h_list), ratios, pred, const, fit, const <= c_max)


def _as_field(source, h):
    return source(h) if callable(source) else source


def support_separation_check(source, F2, sigma1: float, h_list: Sequence[float] = DEFAULT_H_LIST,
                             c_max: float = 10.0) -> BoundReport:
    """Check ``||Tu||^2_{L2(F2 x R)} <= C exp(-sigma1^2 / 2h) ||u||^2``.

    ``F2`` is a list of position intervals at distance ``sigma1`` from ``supp u``.
    """
    reg, tot = [], []
    for h in h_list:
        u = _as_field(source, h)
        reg.append(2 * log_marginal_norm(u, h, F2))
        tot.append(2 * log_marginal_norm(u, h, [(-math.inf, math.inf)]))
    return _bound_report(reg, tot, h_list, sigma1, c_max)


def fourier_support_separation_check(source, F2, sigma2: float, h_list: Sequence[float] = DEFAULT_H_LIST,
                                     c_max: float = 10.0, pad: int = 1) -> BoundReport:
    """Frequency-side analogue: ``supp F_h u`` at distance ``sigma2`` from the frequency set ``F2``."""
    reg, tot = [], []
    for h in h_list:
        v = semiclassical_fourier(_as_field(source, h), h, pad=pad)
        reg.append(2 * log_marginal_norm(v, h, F2))
        tot.append(2 * log_marginal_norm(v, h, [(-math.inf, math.inf)]))
    return _bound_report(reg, tot, h_list, sigma2, c_max)
