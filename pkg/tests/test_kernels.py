import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from lipd.forward import bump
from lipd.kernels import (apply_h_a, apply_semigroup, h_a_weight, heat_kernel, strip_derivative_bound,
                          weight_lower_bound, weight_mixed_derivative, weight_w, weight_w_dtau)
from lipd.model import Field, Grid, ParameterError


def test_kernel_point_values():
    assert heat_kernel(0.25, 0.0, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    for a in (-2.0, 0.3, 1.7):
        assert heat_kernel(0.8, 0.0, a) == pytest.approx(1 / math.sqrt(4 * math.pi * 0.8), rel=1e-15)
    with pytest.raises(ParameterError):
        heat_kernel(0.0, 1.0, 0.0)


@given(st.floats(0.05, 2.0), st.floats(-2.0, 2.0))
def test_kernel_mass_identity(tau, a):
    c = 2 * a * tau  # centre of the shifted Gaussian
    mass, _ = integrate.quad(lambda y: heat_kernel(tau, y, a), c - 40 * math.sqrt(tau), c + 40 * math.sqrt(tau),
                             points=[c], epsabs=0, epsrel=1e-13, limit=200)
    assert mass == pytest.approx(math.exp(a * a * tau), rel=1e-10)


def test_kernel_mass_example():
    mass, _ = integrate.quad(lambda y: heat_kernel(1.0, y, -0.5), -40, 40, points=[-1.0], epsrel=1e-13)
    assert mass == pytest.approx(1.2840254166877414, rel=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(-1.0, 1.0))
def test_semigroup_law(t1, t2, a):
    grid = Grid(-12, 12, 1024)
    phi = bump(grid, 0.3, 1.5)
    lhs = apply_semigroup(t1, apply_semigroup(t2, phi, a), a)
    rhs = apply_semigroup(t1 + t2, phi, a)
    assert (lhs - rhs).norm() <= 1e-8 * phi.norm()


def test_semigroup_identity_positivity_and_gaussian_oracle():
    grid = Grid(-15, 15, 2048)
    phi = bump(grid, 0.0, 1.0)
    assert apply_semigroup(0.0, phi, 0.4) is phi
    assert np.min(apply_semigroup(0.3, phi, -0.8).values) >= -1e-14
    s2, tau = 0.5, 0.7
    g = Field(grid, np.exp(-grid.nodes**2 / (2 * s2)) / math.sqrt(2 * math.pi * s2))
    out = apply_semigroup(tau, g, 0.0)
    var = s2 + 2 * tau
    exact = np.exp(-grid.nodes**2 / (2 * var)) / math.sqrt(2 * math.pi * var)
    assert np.max(np.abs(out.values - exact)) < 1e-12


def test_spectral_and_direct_paths_agree():
    grid = Grid(-12, 12, 801)
    phi = bump(grid, -0.5, 2.0)
    for a in (-0.8125, 0.0, 0.6):
        s = apply_semigroup(0.2, phi, a)
        d = apply_semigroup(0.2, phi, a, method="direct")
        assert (s - d).norm() <= 1e-8 * s.norm()


def test_weight_closed_form_values():
    assert weight_w(0.7, 0.0, 0.0) == pytest.approx(0.5, abs=1e-16)
    y = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(weight_w(1.3, y, 0.0), 0.5 * (1 + special.erf(y / (2 * math.sqrt(1.3)))),
                               rtol=1e-15)
    # a = 0, tau = 1, y = 2: 0.5 * (1 + erf(1))
    assert weight_w(1.0, 2.0, 0.0) == pytest.approx(0.9213503964748574, rel=1e-15)


@pytest.mark.parametrize("tau, y, a", [(1.0, 2.0, 0.0), (0.08, -0.3, -0.8125), (0.5, 1.1, 0.9), (0.02, 0.05, -1.5)])
def test_weight_matches_quadrature_of_heaviside_propagation(tau, y, a):
    """w(tau, y) = int_0^inf K_a(tau, y - x) dx by adaptive quadrature."""
    peak = y - 2 * a * tau
    pts = sorted({0.0, max(peak, 0.0), max(peak, 0.0) + 40 * math.sqrt(tau)})
    val = sum(integrate.quad(lambda x: heat_kernel(tau, y - x, a), lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
              for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo)
    assert weight_w(tau, y, a) == pytest.approx(val, rel=1e-8)


def test_weight_bound_on_dense_grid():
    for a in (-0.8125, 0.0, 1.2):
        taus = np.linspace(1e-3, 2.0, 100)[:, None]
        ys = np.linspace(-10, 10, 100)[None, :]
        w = weight_w(taus, ys, a)
        assert np.all(w <= np.exp(a * a * taus) * (1 + 1e-15))
        assert np.all(w >= 0)


def test_weight_complex_argument_is_finite_in_strip():
    z = np.linspace(-20, 20, 401)[:, None] + 1j * np.linspace(-1, 1, 11)[None, :]
    w = weight_w(0.04, z, -0.8125)
    assert np.all(np.isfinite(w))
    # real axis gives real values
    assert np.max(np.abs(weight_w(0.04, z[:, 5], -0.8125).imag)) == 0.0


def test_dtau_matches_finite_differences_at_second_order():
    tau, y, a = 0.3, np.linspace(-2, 2, 9), -0.8125
    exact = weight_w_dtau(tau, y, a)
    errs = []
    steps = [1e-2, 5e-3, 2.5e-3]
    for d in steps:
        fd = (weight_w(tau + d, y, a) - weight_w(tau - d, y, a)) / (2 * d)
        errs.append(np.max(np.abs(fd - exact)))
    order = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert order >= 1.9


def test_weight_solves_gauged_heat_equation():
    y = np.linspace(-12, 12, 2049)
    for tau, a in ((0.08, -0.8125), (0.5, 0.3), (0.04, 0.0)):
        res = weight_w_dtau(tau, y, a) + h_a_weight(tau, y, a)
        inner = np.abs(y) < 8
        assert np.max(np.abs(res[inner])) <= 1e-6


def test_mixed_derivatives_match_finite_differences():
    tau, a = 0.06, -0.8125
    z = np.array([-0.7 + 0.3j, 0.2 - 0.5j, 1.1 + 0.0j])
    d = 1e-4
    k1 = (weight_w(tau + d, z + d, a) - weight_w(tau + d, z - d, a) - weight_w(tau - d, z + d, a)
          + weight_w(tau - d, z - d, a)) / (4 * d * d)
    np.testing.assert_allclose(weight_mixed_derivative(tau, z, a, 1), k1, rtol=1e-5)
    e = 2e-4
    k2 = (weight_mixed_derivative(tau + e, z + e, a, 1) - weight_mixed_derivative(tau + e, z - e, a, 1)
          - weight_mixed_derivative(tau - e, z + e, a, 1) + weight_mixed_derivative(tau - e, z - e, a, 1)) / (4 * e * e)
    np.testing.assert_allclose(weight_mixed_derivative(tau, z, a, 2), k2, rtol=1e-4)


def test_lower_bound_and_strip_bounds():
    c0 = weight_lower_bound(0.04, 0.08, 2.0, 8.0, -0.8125)
    assert c0 > 0
    assert c0 == pytest.approx(float(weight_w(0.04, -2.0, -0.8125)), rel=1e-12)
    for k in (0, 1, 2):
        coarse = strip_derivative_bound(0.04, 0.08, 1.0, -0.8125, k)
        fine = strip_derivative_bound(0.04, 0.08, 1.0, -0.8125, k, n_tau=41, n_x=801, n_im=21)
        assert math.isfinite(coarse) and abs(fine - coarse) <= 0.1 * coarse


def test_h_a_of_exponential_gaussian():
    grid = Grid(-15, 15, 2048)
    g = Field(grid, np.exp(-grid.nodes**2))
    a = 0.4
    y = grid.nodes
    gp, gpp = -2 * y * g.values, (4 * y * y - 2) * g.values
    exact = -(gpp - 2 * a * gp + a * a * g.values)
    np.testing.assert_allclose(apply_h_a(g, a).values, exact, atol=1e-11)
