import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brushlets.brushlet1d import (Bell, RampProfile, bell_eval, brushlet_freq_eval,
                                  brushlet_freq_matrix, brushlet_time_eval,
                                  central_bell_freq_eval, central_bell_time_eval,
                                  profile_csv, project_interval, ramp_eval)
from brushlets.grid import CoverageError, GridFunction
from brushlets.quadrature import panel_rule

WIDE = Bell.from_knots(0.0, 4.0, 0.5, 0.75)


def test_ramp_examples():
    assert ramp_eval(-1.0) == 0.0 and ramp_eval(1.0) == 1.0
    assert ramp_eval(0.0) == pytest.approx(math.sqrt(2) / 2, abs=2e-16)
    assert ramp_eval(0.5) ** 2 + ramp_eval(-0.5) ** 2 == pytest.approx(1.0, abs=1e-15)


def test_ramp_identity_dense():
    xi = np.random.default_rng(1).uniform(-1.5, 1.5, 10_000)
    for order in (1, 3, 6):
        r = RampProfile(order)
        assert np.max(np.abs(ramp_eval(xi, r) ** 2 + ramp_eval(-xi, r) ** 2 - 1)) < 1e-14


def test_default_theta_is_degree_seven_smoothstep():
    x = np.linspace(-1, 1, 201)
    t = (x + 1) / 2
    smooth = t ** 4 * (35 - 84 * t + 70 * t ** 2 - 20 * t ** 3)
    np.testing.assert_allclose(RampProfile().theta(x), 2 * smooth - 1, atol=1e-14)
    np.testing.assert_allclose(RampProfile().theta(x),
                               (35 * x - 35 * x ** 3 + 21 * x ** 5 - 5 * x ** 7) / 16, atol=1e-15)


def test_ramp_rejects_bad_order():
    with pytest.raises(ValueError):
        RampProfile(0)
    with pytest.raises(ValueError):
        RampProfile(2.5)


def test_ramp_smoothness_at_one():
    # order k transition has k vanishing derivatives of theta at +-1
    h = 1e-3
    x = 1 - np.array([0, h, 2 * h, 3 * h])
    th = RampProfile(3).theta(x)
    assert abs(th[0] - th[1]) < 1e-10


def test_bell_examples():
    core = np.linspace(0.5, 3.25, 50)
    np.testing.assert_array_equal(bell_eval(WIDE, core), 1.0)
    assert bell_eval(WIDE, -0.5) == 0.0 and bell_eval(WIDE, 4.75) == 0.0
    assert bell_eval(WIDE, 0.0) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)


def test_bell_validation():
    with pytest.raises(ValueError):
        Bell.from_knots(0, 1, 0.6, 0.6)
    with pytest.raises(ValueError):
        Bell.from_knots(1, 1, 0.1)


def test_brushlet_examples():
    assert brushlet_freq_eval(WIDE, 3, 10.0) == 0.0
    for n in (0, 5, 11):
        assert brushlet_freq_eval(WIDE, n, 0.0) == pytest.approx(1 / math.sqrt(4.0), abs=1e-15)
    with pytest.raises(ValueError):
        brushlet_freq_eval(WIDE, -1, 0.0)


def _l2(bell, n):
    xi, w = panel_rule(bell.breakpoints(), 64 + 4 * n)
    return float(np.sum(w * brushlet_freq_eval(bell, n, xi) ** 2))


def test_brushlet_unit_norms():
    rng = np.random.default_rng(7)
    for _ in range(20):
        left = rng.uniform(-10, 10)
        length = rng.uniform(0.5, 6)
        eps = rng.uniform(0.05, 0.5, 2) * length
        b = Bell.from_knots(left, left + length, *eps)
        assert _l2(b, int(rng.integers(0, 40))) == pytest.approx(1.0, abs=1e-8)


def test_matrix_rows_match_scalar():
    xi = np.linspace(-1, 5, 31)
    m = brushlet_freq_matrix(WIDE, 6, xi)
    for n in range(7):
        np.testing.assert_allclose(m[n], brushlet_freq_eval(WIDE, n, xi), atol=1e-15)


def test_gram_within_interval_and_neighbour():
    left = Bell.from_knots(-3.0, 0.0, 0.5, 0.5)
    right = Bell.from_knots(0.0, 2.0, 0.5, 0.4)
    breaks = np.unique(np.r_[left.breakpoints(), right.breakpoints()])
    xi, w = panel_rule(breaks, 96)
    rows = np.vstack([brushlet_freq_matrix(left, 12, xi), brushlet_freq_matrix(right, 12, xi)])
    gram = (rows * w) @ rows.T
    assert np.max(np.abs(gram - np.eye(26))) < 1e-8


def test_central_bell_origin():
    g0 = central_bell_time_eval(WIDE, 0.0)
    xi, w = panel_rule([-0.2, 0.2, 0.8, 1.2], 200)
    direct = np.sum(w * central_bell_freq_eval(WIDE, xi)) / (2 * np.pi)
    assert abs(g0 - direct) < 1e-9
    assert abs(g0.imag) < abs(g0.real)


def test_central_bell_decay_reported():
    x = np.linspace(10, 100, 91)
    g = central_bell_time_eval(WIDE, x)
    weighted = np.abs(g) * (1 + x) ** 3
    assert np.isfinite(weighted).all()
    far = np.linspace(100, 160, 13)
    tail = np.abs(central_bell_time_eval(WIDE, far)) * (1 + far) ** 3
    # the weighted envelope does not grow
    assert tail.max() < weighted.max()


def test_central_bell_dilation_invariance():
    small = Bell.from_knots(1.0, 2.0, 0.1, 0.2)
    big = Bell.from_knots(-5.0, 3.0, 0.8, 1.6)
    x = np.linspace(-20, 20, 21)
    np.testing.assert_allclose(central_bell_time_eval(small, x), central_bell_time_eval(big, x),
                               atol=1e-10)


def test_time_brushlet_matches_inverse_transform():
    n = 2
    x = np.array([-3.0, 0.0, 1.5, 6.0])
    xi, w = panel_rule(WIDE.breakpoints(), 256)
    direct = (np.exp(1j * np.outer(x, xi)) * (w * brushlet_freq_eval(WIDE, n, xi))).sum(1) / (2 * np.pi)
    np.testing.assert_allclose(brushlet_time_eval(WIDE, n, x), direct, atol=1e-9)


def _grid(fun, lo=-8.0, hi=8.0, h=1 / 64):
    return GridFunction.sample(lambda p: fun(p[..., 0]), ((lo, hi),), (int(round((hi - lo) / h)) + 1,))


def test_projection_fixes_brushlet():
    g = _grid(lambda x: brushlet_freq_eval(WIDE, 4, x))
    assert np.max(np.abs(project_interval(WIDE, g).values - g.values)) < 1e-10


def test_projection_fixes_core_supported():
    bump = lambda x: np.where(np.abs(x - 1.9) < 1, np.exp(-1 / np.maximum(1e-300, 1 - (x - 1.9) ** 2)), 0)
    g = _grid(bump)
    np.testing.assert_allclose(project_interval(WIDE, g).values, g.values, atol=1e-14)


def test_adjacent_annihilation_and_addition():
    rng = np.random.default_rng(3)
    g = _grid(lambda x: rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    I = Bell.from_knots(-2.0, 1.0, 0.5, 0.5)
    J = Bell.from_knots(1.0, 3.0, 0.5, 0.25)
    U = Bell.from_knots(-2.0, 3.0, 0.5, 0.25)
    assert np.max(np.abs(project_interval(I, project_interval(J, g)).values)) < 1e-10
    pij = project_interval(I, g) + project_interval(J, g)
    assert np.max(np.abs((pij - project_interval(U, g)).values)) < 1e-10
    once = project_interval(U, g)
    assert np.max(np.abs((project_interval(U, once) - once).values)) < 1e-10


def test_nested_centered_intervals():
    rng = np.random.default_rng(4)
    g = _grid(lambda x: rng.standard_normal(x.shape))
    inner = Bell.from_knots(-1.0, 1.0, 0.25, 0.25)
    outer = Bell.from_knots(-3.0, 3.0, 0.5, 0.5)
    pi = project_interval(inner, g)
    for a, b in ((project_interval(outer, pi), pi), (project_interval(inner, project_interval(outer, g)), pi)):
        assert np.max(np.abs((a - b).values)) < 1e-10


def test_projection_callable_agrees_with_grid():
    f = lambda x: np.cos(3 * x) + x ** 2
    g = _grid(f)
    pc = project_interval(WIDE, f)
    np.testing.assert_allclose(project_interval(WIDE, g).values, pc(g.axis(0)), atol=1e-12)


def test_projection_spline_path_on_second_axis():
    # knots off the grid force the spline reflection; the result must not depend on the axis
    bell = Bell.from_knots(0.03, 2.71, 0.4, 0.55)
    x = np.linspace(-2.0, 5.0, 281)
    y = np.linspace(0.0, 1.0, 5)
    f = lambda t: np.exp(-(t - 1.2) ** 2)
    vals = f(x)[:, None] * (1.0 + y[None, :])
    g0 = GridFunction([(-2.0, 5.0), (0.0, 1.0)], [281, 5], vals)
    g1 = GridFunction([(0.0, 1.0), (-2.0, 5.0)], [5, 281], vals.T)
    p0 = project_interval(bell, g0, axis=0).values
    p1 = project_interval(bell, g1, axis=1).values
    np.testing.assert_allclose(p1, p0.T, atol=1e-14)
    exact = project_interval(bell, f)(x)
    np.testing.assert_allclose(p0[:, 0], exact, atol=1e-5)


def test_projection_coverage_error():
    g = _grid(np.sin, lo=0.0, hi=3.0)
    with pytest.raises(CoverageError):
        project_interval(WIDE, g)
    with pytest.raises(TypeError):
        project_interval(WIDE, 3.0)


def test_profile_csv(tmp_path):
    p = profile_csv(tmp_path / "b.csv", WIDE, np.linspace(-1, 5, 13), n=1)
    lines = p.read_text().splitlines()
    assert lines[0] == "xi,value" and len(lines) == 14


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.floats(0.2, 8), st.floats(0.05, 0.5), st.floats(0.05, 0.5),
       st.floats(-1, 1))
def test_bell_squares_sum_to_one_across_knot(left, length, el, er, u):
    # two bells sharing a knot with matching cutoffs partition unity in squares
    a = Bell.from_knots(left - length, left, el * length, er * length)
    b = Bell.from_knots(left, left + length, er * length, el * length)
    xi = left + u * er * length
    assert bell_eval(a, xi) ** 2 + bell_eval(b, xi) ** 2 == pytest.approx(1.0, abs=1e-14)
