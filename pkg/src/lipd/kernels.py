"""Heat kernel ``K_a``, the semigroup ``U_a(tau) = exp(-tau H_a)`` and the weight ``w``.

``H_a = -(d/dy - a)**2`` has Fourier symbol ``(xi + i a)**2`` under the
convention ``d/dy -> i xi``, so ``U_a(tau)`` is the multiplier
``exp(-tau (xi + i a)**2)`` and convolution with

    K_a(tau, y) = exp(-y**2 / (4 tau) + a y) / sqrt(4 pi tau).

The weight ``w(tau, .) = U_a(tau) 1_[0, inf)`` has the closed form
``exp(tau a**2) / 2 * erfc(-(y - 2 a tau) / (2 sqrt(tau)))``, entire in ``y``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import fft as sfft
from scipy import special

from .model import Field, Grid, ParameterError

_SQRT_PI = math.sqrt(math.pi)


def _check_tau(tau):
    if np.any(np.asarray(tau) <= 0):
        raise ParameterError("kernel time must be positive")


def heat_kernel(tau, y, a: float):
    """``K_a(tau, y)``; accepts arrays and complex ``y``."""
    _check_tau(tau)
    y = np.asarray(y)
    tau = np.asarray(tau, dtype=float)
    return np.exp(-y * y / (4.0 * tau) + a * y) / np.sqrt(4.0 * math.pi * tau)


def _zeta(tau, z, a):
    return (z - 2.0 * a * tau) / (2.0 * np.sqrt(tau))


def weight_w(tau, z, a: float):
    """Weight ``w(tau, z)``; real ``z`` gives values in ``(0, exp(a**2 tau))``."""
    _check_tau(tau)
    z = np.asarray(z)
    tau = np.asarray(tau, dtype=float)
    return 0.5 * np.exp(tau * a * a) * special.erfc(-_zeta(tau, z, a))


def weight_w_dtau(tau, z, a: float):
    """Analytic ``dw/dtau``; equals ``-H_a w``."""
    _check_tau(tau)
    z = np.asarray(z)
    tau = np.asarray(tau, dtype=float)
    zeta = _zeta(tau, z, a)
    dzeta = -a / np.sqrt(tau) - zeta / (2.0 * tau)
    return a * a * weight_w(tau, z, a) + np.exp(tau * a * a - zeta * zeta) / _SQRT_PI * dzeta


def weight_w_dz(tau, z, a: float):
    """``dw/dz``, which is the kernel itself."""
    return heat_kernel(tau, z, a)


def weight_mixed_derivative(tau, z, a: float, order: int):
    """``d^k/dtau^k d^k/dz^k w`` for ``k = order`` in ``{0, 1, 2}``."""
    if order == 0:
        return weight_w(tau, z, a)
    z = np.asarray(z)
    tau = np.asarray(tau, dtype=float)
    K = heat_kernel(tau, z, a)
    q = z * z / (4 * tau**2) - 1 / (2 * tau)
    if order == 1:
        return K * q
    if order == 2:
        g = -z / (2 * tau) + a
        q_t = 1 / (2 * tau**2) - z * z / (2 * tau**3)
        q_z = z / (2 * tau**2)
        q_tz = -z / tau**3
        return K * (g * (q * q + q_t) + 2 * q * q_z + q_tz)
    raise ValueError("order must be 0, 1 or 2")


# --- spectral machinery -----------------------------------------------------


def margin_nodes(tau: float, a: float, dy: float) -> int:
    """Zero-padding margin covering the kernel's effective support."""
    return int(math.ceil((10.0 * math.sqrt(2.0 * tau) + 2.0 * abs(a) * tau) / dy))


def padded_length(n: int, margin: int = 0) -> int:
    return sfft.next_fast_len(2 * n + 2 * margin)


def angular_frequencies(N: int, dy: float) -> np.ndarray:
    return 2.0 * math.pi * sfft.fftfreq(N, dy)


def _hermitian_nyquist(m: np.ndarray) -> np.ndarray:
    # the Nyquist bin stands for both +-pi/dy; keep real-to-real maps real
    if m.shape[-1] % 2 == 0:
        m = m.copy()
        m[..., m.shape[-1] // 2] = m[..., m.shape[-1] // 2].real
    return m


def semigroup_multiplier(tau, xi: np.ndarray, a: float) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if tau.ndim:
        tau = tau[..., None]
    return _hermitian_nyquist(np.exp(-tau * (xi + 1j * a) ** 2))


def h_a_multiplier(xi: np.ndarray, a: float) -> np.ndarray:
    return _hermitian_nyquist((xi + 1j * a) ** 2 + 0j)


def spectral_apply(values: np.ndarray, dy: float, multiplier, N: int) -> np.ndarray:
    """Apply Fourier multiplier(s) to zero-padded samples along the last axis.

    ``multiplier`` is a callable of the angular frequency grid returning an
    array broadcastable against ``values`` padded to length ``N``.
    """
    values = np.asarray(values)
    n = values.shape[-1]
    xi = angular_frequencies(N, dy)
    spec = sfft.fft(values, n=N, axis=-1)
    out = sfft.ifft(spec * multiplier(xi), axis=-1)[..., :n]
    if not np.iscomplexobj(values):
        out = out.real
    return out


def apply_semigroup(tau: float, phi: Field, a: float, method: str = "spectral") -> Field:
    """``U_a(tau) phi``.

    ``method='spectral'`` uses the multiplier on a zero-padded grid;
    ``method='direct'`` sums ``dy * K_a(tau, y_i - y_j) phi_j``.
    """
    if tau < 0:
        raise ParameterError("semigroup time must be nonnegative")
    if tau == 0:
        return phi
    return phi.with_values(semigroup_matrix(tau, phi.grid, a, method) @ phi.values
                           if method == "direct"
                           else _spectral_semigroup(tau, phi.values, phi.grid.dy, a))


def _spectral_semigroup(tau, values, dy, a):
    n = values.shape[-1]
    N = padded_length(n, margin_nodes(tau, a, dy))
    return spectral_apply(values, dy, lambda xi: semigroup_multiplier(tau, xi, a), N)


def toeplitz_from_circulant(col: np.ndarray, n: int) -> np.ndarray:
    """Top-left ``n x n`` block of the circulant with first column ``col``."""
    idx = np.arange(n)
    return col[(idx[:, None] - idx[None, :]) % col.size]


def semigroup_matrix(tau: float, grid: Grid, a: float, method: str = "spectral") -> np.ndarray:
    """Dense matrix of ``U_a(tau)`` on ``grid``, consistent with :func:`apply_semigroup`."""
    if tau < 0:
        raise ParameterError("semigroup time must be nonnegative")
    n, dy = grid.n, grid.dy
    if tau == 0:
        return np.eye(n)
    if method == "direct":
        d = dy * np.arange(-(n - 1), n)
        k = dy * heat_kernel(tau, d, a)
        idx = np.arange(n)
        return k[idx[:, None] - idx[None, :] + n - 1]
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    N = padded_length(n, margin_nodes(tau, a, dy))
    col = sfft.ifft(semigroup_multiplier(tau, angular_frequencies(N, dy), a)).real
    return toeplitz_from_circulant(col, n)


def apply_h_a(phi: Field, a: float) -> Field:
    """``H_a phi`` spectrally, for fields that decay at both ends."""
    N = padded_length(phi.grid.n)
    return phi.with_values(spectral_apply(phi.values, phi.grid.dy,
                                          lambda xi: h_a_multiplier(xi, a), N))


def h_a_weight(tau: float, y: np.ndarray, a: float) -> np.ndarray:
    """``H_a w(tau, .)`` on a uniform node set.

    ``w`` itself does not decay, but ``dw/dy = K_a`` does, so the second
    derivative is taken spectrally from the kernel samples.
    """
    y = np.asarray(y, dtype=float)
    dy = y[1] - y[0]
    K = heat_kernel(tau, y, a)
    dK = spectral_apply(K, dy, lambda xi: _hermitian_nyquist(1j * xi + 0j), padded_length(y.size))
    return -(dK - 2.0 * a * K + a * a * weight_w(tau, y, a))


def weight_lower_bound(tau0: float, tau_star: float, L0: float, y_max: float, a: float,
                       n_tau: int = 101, n_y: int = 401) -> float:
    """Measured ``min w`` over ``[tau0, tau_star] x [-L0, y_max]``."""
    taus = np.linspace(tau0, tau_star, n_tau)
    ys = np.linspace(-L0, y_max, n_y)
    return float(np.min(weight_w(taus[:, None], ys[None, :], a)))


def strip_derivative_bound(tau0: float, tau_star: float, rho0: float, a: float, order: int,
                           x_range: tuple[float, float] = (-20.0, 20.0),
                           n_tau: int = 21, n_x: int = 401, n_im: int = 11) -> float:
    """Sampled ``sup |d_tau^k d_z^k w|`` over ``[tau0, tau*] x {|Im z| <= rho0}``."""
    taus = np.linspace(tau0, tau_star, n_tau)[:, None, None]
    x = np.linspace(*x_range, n_x)[None, :, None]
    eta = np.linspace(-rho0, rho0, n_im)[None, None, :]
    vals = weight_mixed_derivative(taus, x + 1j * eta, a, order)
    return float(np.max(np.abs(vals)))
