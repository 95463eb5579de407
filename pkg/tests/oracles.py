"""Independent reference computations used by several test modules."""

import math

import numpy as np
from scipy import integrate
from scipy.stats import norm

from lipd.kernels import weight_w


def call_price_U0(params, tau, y):
    """``E[exp(-r tau) (A_tau - D)^+] / D`` for log-normal ``A`` with drift ``mu0``; ``y = log(A/D)``."""
    s = params.sigma0 * math.sqrt(tau)
    d1 = (y + (params.mu0 + 0.5 * params.sigma0**2) * tau) / s
    return math.exp(-params.r * tau) * (np.exp(y + params.mu0 * tau) * norm.cdf(d1) - norm.cdf(d1 - s))


def brute_duhamel(fn, y, a, T, t0=0.0, t1=None):
    """``int_{t0}^{t1} (U_a(T - s)[w(s) fn])(y) ds`` by nested adaptive quadrature.

    The semigroup is written as a Gauss-Hermite-type integral over
    ``theta`` (``x = y - 2 sqrt(T - s) theta``) and time is substituted
    ``s = u**2`` to remove the ``sqrt`` singularity of ``w`` at ``s = 0``.
    """
    t1 = T if t1 is None else t1

    def inner(s):
        st = 2 * np.sqrt(T - s)
        g = lambda th: (np.exp(-th * th) / np.sqrt(np.pi) * np.exp(a * st * th)
                        * weight_w(s, y - st * th, a) * fn(y - st * th))
        c = y / st
        pts = sorted({-9.0, 9.0, min(max(c, -9.0), 9.0)})
        return sum(integrate.quad(g, lo, hi, epsabs=1e-14, epsrel=1e-10, limit=200)[0]
                   for lo, hi in zip(pts[:-1], pts[1:]))

    return integrate.quad(lambda u: 2 * u * inner(u * u), np.sqrt(t0), np.sqrt(t1),
                          epsabs=1e-14, epsrel=1e-10, limit=200)[0]
