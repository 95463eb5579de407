import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipd.model import (Field, Grid, ModelParams, ParameterError, derive_transformed, from_heat_coords,
                        gauge_v_from_V, gauge_V_from_v, payoff, rescale_time, to_heat_coords)


def exact_constants(sigma0, mu0, r):
    s2 = Fraction(sigma0) ** 2
    a0 = (s2 - 2 * Fraction(mu0)) / (2 * s2)
    return a0, Fraction(r) + s2 * a0 * a0 / 2


@pytest.mark.parametrize("sigma0, mu0, r, expected", [
    (1.0, 0.5, 0.0, (0.0, 0.0, -1.0)),
    (0.4, 0.05, 0.03, (0.1875, 0.0328125, -0.8125)),
    (1.0, 0.0, 0.0, (0.5, 0.125, -0.5)),
])
def test_gauge_constants_examples(sigma0, mu0, r, expected):
    tp = derive_transformed(ModelParams(sigma0=sigma0, mu0=mu0, r=r))
    assert tp.a0 == pytest.approx(expected[0], abs=1e-15)
    assert tp.b0 == pytest.approx(expected[1], abs=1e-15)
    assert tp.a == pytest.approx(expected[2], abs=1e-15)


@given(st.floats(0.05, 3.0), st.floats(-1.0, 1.0), st.floats(0.0, 0.5))
def test_gauge_constants_match_rational_oracle(sigma0, mu0, r):
    tp = derive_transformed(ModelParams(sigma0=sigma0, mu0=mu0, r=r))
    a0, b0 = exact_constants(sigma0, mu0, r)
    assert abs(tp.a0 - float(a0)) <= 1e-15 * max(1.0, abs(float(a0)))
    assert abs(tp.b0 - float(b0)) <= 1e-15 * max(1.0, abs(float(b0)))
    assert tp.a == tp.a0 - 1.0


@pytest.mark.parametrize("kwargs", [{"sigma0": 0.0}, {"sigma0": -1.0}, {"tau_star": 0.0}, {"debt": 0.0},
                                    {"r": -0.01}, {"mu0": math.nan}])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ParameterError):
        ModelParams(**kwargs)


def test_heat_coords_examples():
    p = ModelParams(debt=2.0)
    assert to_heat_coords(3.0, 2.0, 2.0, p, maturity=3.0) == (0.0, 0.0, 1.0)
    tau, y, U = to_heat_coords(0.0, 2.0 * math.e, 0.0, p, maturity=1.0)
    assert y == pytest.approx(1.0, abs=1e-15) and U == 0.0
    t, A, u = from_heat_coords(0.7, -0.3, 0.2, p, maturity=2.0)
    back = to_heat_coords(t, A, u, p, maturity=2.0)
    assert np.allclose(back, (0.7, -0.3, 0.2), rtol=1e-14, atol=0)
    with pytest.raises(ParameterError):
        to_heat_coords(0.0, -1.0, 0.0, p, maturity=1.0)


@given(st.integers(0, 2**31))
def test_gauge_round_trip(seed):
    rng = np.random.default_rng(seed)
    grid = Grid(-5, 5, 101)
    V = Field(grid, rng.standard_normal(grid.n))
    tp = derive_transformed(ModelParams())
    tau = float(rng.uniform(0, 2))
    back = gauge_V_from_v(gauge_v_from_V(V, tau, tp), tau, tp)
    assert np.max(np.abs(back.values - V.values)) <= 1e-13 * np.max(np.abs(V.values))


def test_gauge_trivial_cases():
    grid = Grid(-3, 3, 61)
    tp = derive_transformed(ModelParams())
    assert not np.any(gauge_v_from_V(Field.zeros(grid), 0.4, tp).values)
    V = Field(grid, np.cos(grid.nodes))
    np.testing.assert_allclose(gauge_v_from_V(V, 0.0, tp).values, np.exp(-grid.nodes) * V.values, rtol=1e-15)


def test_rescale_time():
    grid = Grid(-1, 1, 11)
    f = Field(grid, np.sin(grid.nodes))
    t, g = rescale_time(0.3, f, ModelParams(sigma0=math.sqrt(2)))
    assert t == pytest.approx(0.3, rel=1e-15)
    np.testing.assert_allclose(g.values, f.values, rtol=1e-15)
    t, _ = rescale_time(1.0, f, ModelParams(sigma0=1.0))
    assert t == 0.5
    _, z = rescale_time(1.0, Field.zeros(grid), ModelParams())
    assert not np.any(z.values)


def test_gauged_pde_matches_pricing_pde():
    """The gauge plus time change maps the pricing PDE onto d/dtau + H_a (FD residuals agree)."""
    p = ModelParams(sigma0=0.5, mu0=0.1, r=0.04)
    tp = derive_transformed(p)
    s = p.time_scale
    y = np.linspace(-2, 2, 401)
    dy = y[1] - y[0]

    def v(tn, yy):  # smooth test function in normalized time
        return np.exp(-yy**2) * np.cos(tn + yy)

    def U(tau, yy):
        return np.exp(yy - tp.b0 * tau) * v(s * tau, yy)

    tau, dt = 0.6, 1e-5
    d = lambda fn, k: np.gradient(fn, dy) if k == 1 else np.gradient(np.gradient(fn, dy), dy)
    Uy = U(tau, y)
    # pricing operator with drift mu in heat coordinates: U_tau = s U_yy + (mu - s) U_y - r U
    res_U = (U(tau + dt, y) - U(tau - dt, y)) / (2 * dt) - (s * d(Uy, 2) + (p.mu0 - s) * d(Uy, 1) - p.r * Uy)
    vy = v(s * tau, y)
    a = tp.a
    H_v = -(d(vy, 2) - 2 * a * d(vy, 1) + a * a * vy)
    res_v = (v(s * tau + s * dt, y) - v(s * tau - s * dt, y)) / (2 * s * dt) + H_v
    inner = slice(10, -10)
    mapped = np.exp(y - tp.b0 * tau) * s * res_v
    assert np.max(np.abs(res_U[inner] - mapped[inner])) < 1e-3
    assert np.max(np.abs(mapped[inner])) > 0.1  # nontrivial residuals


def test_grid_and_field_validation():
    with pytest.raises(ParameterError):
        Grid(1, 0, 10)
    with pytest.raises(ParameterError):
        Grid(0, 1, 1)
    g = Grid(-1, 1, 21)
    assert g.has_node_at(0.0) and g.index_of(0.55) == 16
    with pytest.raises(ParameterError):
        Field(g, np.zeros(3))
    with pytest.raises(ParameterError):
        Field(g, np.zeros(21)) + Field(Grid(-1, 1, 11), np.zeros(11))
    assert Grid.from_nodes(g.nodes) == g
    with pytest.raises(ParameterError):
        Grid.from_nodes([0.0, 1.0, 3.0])
    f = Field(g, np.ones(21))
    assert f.norm() == pytest.approx(math.sqrt(2.0), rel=1e-14)
    assert (2 * f).norm() == pytest.approx(2 * f.norm())


def test_payoff():
    np.testing.assert_array_equal(payoff(np.array([-1.0, 0.0])), [0.0, 0.0])
    assert payoff(np.array([1.0]))[0] == pytest.approx(math.e - 1)
