import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipd import symbols as sy
from lipd.forward import DEFAULT_GRID, DriftPerturbation, bump, split_I1_I2
from lipd.kernels import apply_h_a
from lipd.model import Field, Grid, ModelParams, ParameterError

P = ModelParams()
SYM = sy.SymbolFn.from_params(P)
CUT = sy.build_cutoffs()
F_BUMP = DriftPerturbation(bump(DEFAULT_GRID, 0.5, 1.0, 0.05), 1.0)


def test_default_symbol_times():
    assert SYM.a == pytest.approx(-0.8125)
    assert SYM.tau0 == pytest.approx(0.04) and SYM.tau_star == pytest.approx(0.08)
    with pytest.raises(ParameterError):
        sy.SymbolFn(-0.8, 0.1, 0.05)


def test_two_forms_agree_and_vectorized_matches():
    for y in np.linspace(-3, 3, 6):
        for xi in np.linspace(-20, 20, 6):
            parts, direct = sy.symbol_p(y, xi, SYM.a, SYM.tau0, SYM.tau_star, return_both=True)
            assert abs(parts - direct) <= 1e-8
            assert abs(SYM(y, xi) - parts) <= 1e-8
    ys, xis = np.linspace(-3, 3, 7), np.linspace(-10, 10, 9)
    np.testing.assert_allclose(SYM.grid(ys, xis), SYM(ys[:, None], xis[None, :]), atol=1e-14)


def test_constant_weight_reduction():
    """With w = 1 and a = 0 the symbol is 1 - exp(-(tau* - tau0) xi^2)."""
    one = (lambda s, y: 1.0, lambda s, y: 0.0)
    for xi in (0.0, 0.7, 3.0, 15.0):
        p = sy.symbol_p(0.3, xi, 0.0, 0.04, 0.08, weight=one)
        assert p == pytest.approx(1 - math.exp(-0.04 * xi * xi), abs=1e-13)


def test_large_frequency_limit():
    y = np.linspace(-3, 3, 13)
    xis = 2.0 ** np.arange(3, 12)
    r = [np.max(np.abs(SYM(y, x) - SYM.limit(y))) * (1 + x * x) for x in xis]
    assert max(r[-4:]) <= 1.5 * max(r[:4])
    assert r[-1] < 10


def test_holomorphic_in_strip():
    x = np.linspace(-3, 3, 7)[:, None]
    eta = np.array([-0.8, 0.0, 0.5])[None, :]
    for xi in (0.0, 2.0, 30.0):
        assert SYM.holomorphy_residual(x, eta, xi) < 1e-6


def test_derivative_profile_bounded():
    xi = 2.0 ** np.arange(0, 10)
    for alpha, beta in ((0, 1), (1, 1), (2, 2)):
        prof = sy.symbol_derivative_profile(SYM, alpha, beta, xi)
        assert np.all(np.isfinite(prof))
        assert np.max(prof[len(xi) // 2:]) <= 2.0 * np.max(prof[: len(xi) // 2])


def test_cutoff_values():
    assert CUT.chi1(np.array(0.2)) == 0.0 and CUT.chi1(np.array(0.6)) == 1.0
    assert CUT.psi(np.array(0.5)) == 0.0 and CUT.psi(np.array(3.0)) == 1.0
    assert all(CUT.validate().values())
    t = np.linspace(0, 1, 200001)
    assert np.max(sy.smooth_step_derivative(t)) == pytest.approx(sy.SUP_STEP_DERIVATIVE, rel=1e-8)
    assert CUT.eps0 * CUT.sup_dpsi < CUT.rho0
    with pytest.raises(ParameterError):
        sy.build_cutoffs(eps=0.6)


@given(st.floats(-2, 3))
def test_smooth_step_properties(t):
    s = sy.smooth_step(np.array(t))
    assert 0 <= s <= 1
    assert float(s + sy.smooth_step(np.array(1 - t))) == pytest.approx(1.0, abs=1e-15)
    assert sy.smooth_step(np.array(t + 1e-3)) >= s


def test_smooth_step_derivative_matches_fd():
    t = np.linspace(0.05, 0.95, 19)
    d = 1e-6
    fd = (sy.smooth_step(t + d) - sy.smooth_step(t - d)) / (2 * d)
    np.testing.assert_allclose(sy.smooth_step_derivative(t), fd, rtol=1e-6, atol=1e-10)


def test_semiclassical_split():
    h = 0.1
    p1, p2 = sy.semiclassical_symbols(SYM, CUT, h)
    x, xi = np.linspace(-2, 2, 5), np.linspace(-1, 1, 41)
    np.testing.assert_allclose(p1.grid(x, xi) + p2.grid(x, xi), SYM.grid(x, xi / h), atol=1e-14)
    far = np.abs(xi) >= 0.5
    assert not np.any(p2.grid(x, xi)[:, far])


def test_p1_deviation_is_second_order():
    h_list = (0.02, 0.01, 0.005, 0.0025)
    dev = [sy.p1_deviation(SYM, CUT, h) for h in h_list]
    assert 1.8 <= sy.order_fit(h_list, dev) <= 2.2


def test_quantization_identities():
    grid = Grid(-10, 10, 1024)
    u = Field(grid, np.exp(-grid.nodes**2 / 2) * np.cos(3 * grid.nodes))
    h = 0.1
    one = sy.MultiplierSymbol(lambda xi: np.ones_like(xi))
    assert np.max(np.abs(sy.quantize_apply(one, u, h).values - u.values)) <= 1e-8
    sq = sy.MultiplierSymbol(lambda xi: xi**2)
    y = grid.nodes
    upp = np.exp(-y**2 / 2) * ((y * y - 1 - 9) * np.cos(3 * y) + 6 * y * np.sin(3 * y))
    assert np.max(np.abs(sy.quantize_apply(sq, u, h).values + h * h * upp)) <= 1e-6
    # dense path for a non-separable callable
    dense = lambda yy, xi: xi**2 + 0 * yy
    assert np.max(np.abs(sy.quantize_apply(dense, u, h).values + h * h * upp)) <= 1e-6


def test_quantization_linearity():
    h = 0.05
    f = F_BUMP.f
    p1, p2 = sy.semiclassical_symbols(SYM, CUT, h)
    full = sy.SemiclassicalSymbol(SYM, lambda xi: np.ones_like(xi), h)
    lhs = sy.quantize_apply(full, f, h).values
    rhs = sy.quantize_apply(p1, f, h).values + sy.quantize_apply(p2, f, h).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))


def test_full_symbol_quantizes_late_part():
    """Op_h(p(x, xi/h)) applied to the normalized f is H_a I2, for every h."""
    _, I2 = split_I1_I2(F_BUMP, P, P.tau_star / 2)
    ref = apply_h_a(I2, SYM.a).values
    f_norm = F_BUMP.f * (1 / P.time_scale)
    for h in (0.2, 0.05):
        full = sy.SemiclassicalSymbol(SYM, lambda xi: np.ones_like(xi), h)
        got = sy.quantize_apply(full, f_norm, h).values
        assert np.max(np.abs(got - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_resolution_guard():
    grid = Grid(-4, 4, 64)
    u = Field(grid, np.exp(-grid.nodes**2 / 2) * np.cos(24 * grid.nodes))
    with pytest.raises(sy.ResolutionError):
        sy.quantize_apply(sy.MultiplierSymbol(lambda xi: np.ones_like(xi)), u, 1.0)


def test_negligible_output_does_not_trip_resolution_guard():
    # chi1 removes the whole spectrum of a centred Gaussian at small h; rounding noise is not an edge problem
    grid = Grid(-10, 10, 2048)
    u = Field(grid, np.exp(-grid.nodes**2 / 2))
    p1 = sy.semiclassical_symbols(SYM, CUT, 0.0125)[0]
    out = sy.quantize_apply(p1, u, 0.0125)
    assert out.norm() <= 1e-12 * u.norm()


def test_p2_frequency_support():
    rep = sy.verify_p2_support(F_BUMP.f, SYM, CUT, (0.1, 0.05, 0.025, 0.0125))
    assert max(rep.mass_outside_half) <= 1e-10
    assert rep.fit.conclusive and rep.fit.delta > 0
    # chi2 = 1 - chi1 reaches out to |xi| = 1/2, so mass beyond 1/4 is not small
    assert max(rep.mass_outside_quarter) > 1e-3
    zero = sy.verify_p2_support(Field.zeros(DEFAULT_GRID), SYM, CUT, (0.1, 0.05, 0.025))
    assert zero.mass_outside_half == [0.0] * 3 and all(math.isinf(v) for v in zero.log_ratio)


def test_weighted_inequality_trivial_symbol():
    grid = Grid(-10, 10, 1024)
    u = Field(grid, np.exp(-grid.nodes**2 / 2) * np.cos(grid.nodes))
    one = lambda h: sy.MultiplierSymbol(lambda xi: np.ones_like(xi))
    rep = sy.verify_weighted_inequality(u, one, CUT, 0.05)
    np.testing.assert_allclose(rep.lhs, rep.rhs, rtol=1e-12)
    assert rep.constant <= 1e-10


def test_weighted_inequality_unweighted_bounded():
    from lipd.experiments import modulated_gaussian
    grid = Grid(-10, 10, 1024)
    fam = lambda h: sy.semiclassical_symbols(SYM, CUT, h)[0]
    rep = sy.verify_weighted_inequality(modulated_gaussian(grid), fam, CUT, 0.0, (0.2, 0.1, 0.05, 0.025))
    assert math.isfinite(rep.constant) and rep.growth <= 2.0
    with pytest.raises(ParameterError):
        sy.verify_weighted_inequality(modulated_gaussian(grid), fam, CUT, 0.6)


def test_early_part_smallness():
    rep = sy.verify_I1_smallness(F_BUMP, P)
    assert rep.fit.conclusive and rep.fit.delta > 0 and rep.fit.r2 >= 0.98
    assert rep.bound_holds
    zero = sy.verify_I1_smallness(DriftPerturbation(Field.zeros(DEFAULT_GRID), 0.0), P)
    assert all(math.isinf(v) and v < 0 for v in zero.fit.log_norms)
    assert zero.norm_f1 == 0.0
