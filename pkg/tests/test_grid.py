import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as G

from nsbf_dirac import grid as grid_mod
from nsbf_dirac.grid import (
    Grid,
    GridFunction,
    GridMismatchError,
    cumulative_integral,
    cumulative_integral_power_weight,
    extrapolate_origin,
    finite_difference,
    grid_from_samples,
    pointwise_combine,
)


def test_grid_points():
    g = Grid(3.0, 7)
    assert g.r[0] == 0.0 and g.r[-1] == 3.0
    assert np.all(np.diff(g.r) > 0)
    assert g.h == pytest.approx(0.5)
    assert g.index_at(1.26) == 3
    with pytest.raises(ValueError):
        Grid(1.0, 1)
    with pytest.raises(ValueError):
        Grid(-1.0, 5)


def test_grid_from_samples():
    g = grid_from_samples(np.linspace(0, 2, 11))
    assert g == Grid(2.0, 11)
    with pytest.raises(ValueError):
        grid_from_samples([0.0, 0.1, 0.3])
    with pytest.raises(ValueError):
        grid_from_samples([0.1, 0.2, 0.3])


def test_constant_integrates_to_r():
    g = Grid(1.0, 101)
    F = cumulative_integral(np.ones(g.n_points), g.h)
    assert F[0] == 0.0
    assert np.max(np.abs(F - g.r)) < 1e-14


def test_square_on_0_2():
    g = Grid(2.0, 100001)
    F = cumulative_integral(g.r ** 2, g.h)
    assert abs(F[-1] - 8 / 3) < 1e-12


def test_exponential():
    g = Grid(1.0, 1001)
    F = cumulative_integral(np.exp(g.r), g.h)
    assert abs(F[-1] - (np.e - 1)) < 1e-12
    assert np.max(np.abs(F - np.expm1(g.r))) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4, 5, 8, 9, 10, 41])
def test_cubic_exact_on_every_grid_size(n):
    g = Grid(1.7, n)
    f = 1 - 2 * g.r + 3 * g.r ** 2 - 0.5 * g.r ** 3 if n >= 4 else 1 - 2 * g.r
    F = cumulative_integral(f, g.h)
    exact = g.r - g.r ** 2 + g.r ** 3 - 0.125 * g.r ** 4 if n >= 4 else g.r - g.r ** 2
    assert np.max(np.abs(F - exact)) < 1e-13


def test_monotone_for_nonnegative():
    g = Grid(5.0, 2001)
    F = cumulative_integral(np.exp(-g.r) * (1 + np.sin(3 * g.r) ** 2), g.h)
    assert np.all(np.diff(F) > 0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 10_000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=(2, 257))
    h = 0.01
    lhs = cumulative_integral(a * f + b * g, h)
    rhs = a * cumulative_integral(f, h) + b * cumulative_integral(g, h)
    scale = (abs(a) + abs(b)) * max(np.max(np.abs(cumulative_integral(np.abs(f), h))), 1.0)
    assert np.max(np.abs(lhs - rhs)) <= 1e-14 * scale * 10 + 1e-300


@settings(max_examples=20, deadline=None)
@given(c=st.lists(st.floats(-3, 3), min_size=4, max_size=4), b=st.floats(0.5, 4.0))
def test_cubic_exactness_property(c, b):
    g = Grid(b, 64)
    poly = np.polynomial.Polynomial(c)
    F = cumulative_integral(poly(g.r), g.h)
    exact = poly.integ()(g.r)
    assert np.max(np.abs(F - exact)) <= 1e-12 * (1 + np.max(np.abs(exact)))


@pytest.mark.parametrize("f,prim", [(np.cos, np.sin), (lambda t: 1 / (1 + t), np.log1p)])
def test_refinement_order(f, prim):
    errs = []
    for n in (11, 21, 41):
        g = Grid(2.0, n)
        errs.append(np.max(np.abs(cumulative_integral(f(g.r), g.h) - prim(g.r))))
    assert errs[0] / errs[1] >= 16 * 0.8
    assert errs[1] / errs[2] >= 16 * 0.8


def test_quadrature_order_setting_is_read_at_call_time(monkeypatch):
    g = Grid(2.0, 41)
    f = np.cos(g.r)
    monkeypatch.setattr(grid_mod, "QUADRATURE_ORDER", 4)
    e4 = np.max(np.abs(cumulative_integral(f, g.h) - np.sin(g.r)))
    monkeypatch.setattr(grid_mod, "QUADRATURE_ORDER", 8)
    e8 = np.max(np.abs(cumulative_integral(f, g.h) - np.sin(g.r)))
    assert e8 < e4 / 100


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.6, 3.0, 6.0])
def test_power_weight(alpha):
    g = Grid(1.0, 401)
    F = cumulative_integral_power_weight(np.ones(g.n_points), g.h, alpha)
    exact = g.r ** (alpha + 1) / (alpha + 1)
    assert np.max(np.abs(F[1:] / exact[1:] - 1)) < 1e-12
    # smooth factor: int t^alpha e^{-t} = lower incomplete gamma
    from scipy.special import gammainc
    F = cumulative_integral_power_weight(np.exp(-g.r), g.h, alpha)
    exact = gammainc(alpha + 1, g.r) * G(alpha + 1)
    assert np.max(np.abs(F[1:] / exact[1:] - 1)) < 1e-11


def test_power_weight_rejects_nonintegrable():
    with pytest.raises(ValueError):
        cumulative_integral_power_weight(np.ones(5), 0.1, -1.0)


def test_pointwise_combine_examples():
    g = Grid(1.0, 11)
    two = GridFunction(g, 2 * np.ones(11))
    three = GridFunction(g, 3 * np.ones(11))
    assert np.all(pointwise_combine(lambda a, b: a * b, two, three).values == 6)
    r = GridFunction(g, g.r)
    q = pointwise_combine(lambda a, b: a / b, r, r, origin=1.0)
    assert np.all(q.values == 1.0)
    r2 = GridFunction(g, g.r ** 2)
    q = pointwise_combine(lambda a, b: a / b, r2, r)
    assert q.values[0] == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(q.values, g.r)
    with pytest.raises(GridMismatchError):
        pointwise_combine(lambda a, b: a + b, two, GridFunction(Grid(2.0, 11), np.ones(11)))


def test_grid_function_validation_and_csv(tmp_path):
    g = Grid(1.0, 5)
    with pytest.raises(GridMismatchError):
        GridFunction(g, np.ones(4))
    gf = GridFunction(g, np.array([0.1, 1 / 3, np.pi, 2.0, -1e-300]))
    with pytest.raises(ValueError):
        gf.values[0] = 1.0
    path = tmp_path / "f.csv"
    gf.to_csv(path)
    back = GridFunction.from_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, gf.values)


def test_finite_difference_sixth_order():
    g = Grid(2.0, 201)
    d = finite_difference(np.sin(3 * g.r), g.h)
    assert np.max(np.abs(d - 3 * np.cos(3 * g.r))) < 1e-8


def test_extrapolate_origin_is_exact_for_cubics():
    r = np.arange(6) * 0.1
    v = 2 - r + 4 * r ** 2 - r ** 3
    assert extrapolate_origin(v) == pytest.approx(2.0, abs=1e-13)


@pytest.mark.parametrize("alpha", [0.5, 7.0, 30.0, 120.0])
def test_power_weight_large_exponent(alpha):
    # int_0^r t**alpha e**-t dt = Gamma(alpha+1) P(alpha+1, r), relative accuracy at every node
    from scipy.special import gamma, gammainc

    g = Grid(1.0, 4001)
    F = cumulative_integral_power_weight(np.exp(-g.r), g.h, alpha)
    exact = gamma(alpha + 1) * gammainc(alpha + 1, g.r)
    with np.errstate(under="ignore"):
        keep = exact > 1e-300
    rel = np.abs(F[keep] - exact[keep]) / exact[keep]
    assert np.max(rel[1:]) < 1e-11
