import math

import numpy as np
import pytest

from barrier_wave.geometry import CartesianPoint, Diamond, NullLattice
from barrier_wave.linear import (check_nondegeneracy, closed_form_data, dalembert, dalembert_grid,
                                 degenerate_data, lin_null_derivs, lin_u, smalldata_data,
                                 spline_data)

from conftest import polynomial_data, zeros

DELTA = 1e-3


def test_initial_trace_with_zero_velocity():
    data = polynomial_data(np.sin, np.cos, zeros)
    for x in (-1.3, 0.0, 0.4, 2.0):
        assert dalembert(data, CartesianPoint(0.0, x)) == pytest.approx(math.sin(x), abs=1e-14)


def test_constant_velocity_gives_linear_ramp():
    data = polynomial_data(zeros, zeros, lambda x: 0.7 + zeros(x))
    for t in (0.1, 0.5, 1.0):
        assert dalembert(data, CartesianPoint(t, 0.3)) == pytest.approx(0.7 * t, abs=1e-12)


def test_example_free_solution_at_origin(example_data):
    assert dalembert(example_data, CartesianPoint(0.0, 0.0)) == pytest.approx(0.997, abs=1e-12)
    assert float(dalembert_grid(example_data, 0.0, 0.0)) == pytest.approx(0.997, abs=1e-12)


def test_example_free_solution_matches_closed_form(example_data):
    rng = np.random.default_rng(3)
    t = rng.uniform(0, 5, 200)
    x = rng.uniform(-4, 4, 200)
    exact = 1 - DELTA * ((t - 2) ** 2 + x**2 - 1)
    assert np.max(np.abs(dalembert_grid(example_data, t, x) - exact)) <= 1e-12


def test_grid_and_quadrature_agree():
    data = smalldata_data()
    for t, x in ((0.5, 0.2), (2.0, -1.0), (3.5, 2.5)):
        a = dalembert(data, CartesianPoint(t, x))
        b = float(dalembert_grid(data, t, x))
        assert a == pytest.approx(b, abs=1e-12)


def test_null_derivatives_of_quadratic_profile():
    data = polynomial_data(lambda y: 0.5 * y**2, lambda y: y, zeros)
    t, x = 0.7, -0.2
    du, dv = lin_null_derivs(data, CartesianPoint(t, x))
    assert du == pytest.approx(0.5 * (x + t), abs=1e-14)
    assert dv == pytest.approx(-0.5 * (x - t), abs=1e-14)


@pytest.mark.parametrize("t, x", [(0.0, 0.0), (1.0, 0.5), (3.0, -2.0)])
def test_example_null_derivatives(example_data, t, x):
    du, dv = lin_null_derivs(example_data, CartesianPoint(t, x))
    assert du == pytest.approx(-DELTA * (t + x - 2), abs=1e-15)
    assert dv == pytest.approx(-DELTA * (t - x - 2), abs=1e-15)


def test_example_null_derivatives_vanish_at_apex(example_data):
    du, dv = lin_null_derivs(example_data, CartesianPoint(2.0, 0.0))
    assert abs(du) <= 1e-15 and abs(dv) <= 1e-15


def test_u_derivative_depends_on_u_only():
    data = smalldata_data()
    a = lin_null_derivs(data, CartesianPoint(1.0, 0.5))[0]
    b = lin_null_derivs(data, CartesianPoint(0.25, 1.25))[0]
    assert a == b


def test_zero_data_is_one_zero_interval_per_sign():
    data = polynomial_data(zeros, zeros, zeros)
    rep = check_nondegeneracy(data, (-1.0, 1.0))
    assert rep.plus_zero_intervals == [(-1.0, 1.0)]
    assert rep.minus_zero_intervals == [(-1.0, 1.0)]


def test_sine_data_has_isolated_zeros():
    data = polynomial_data(lambda x: 0.5 * np.sin(x), lambda x: 0.5 * np.cos(x), zeros)
    rep = check_nondegeneracy(data, (-math.pi, math.pi), tol=1e-12)
    for ivs in (rep.plus_zero_intervals, rep.minus_zero_intervals):
        mids = sorted(0.5 * (a + b) for a, b in ivs)
        assert len(mids) == 2
        assert mids == pytest.approx([-math.pi / 2, math.pi / 2], abs=2 * rep.step)
        assert all(b - a <= 2 * rep.step for a, b in ivs)
    assert rep.plus_degenerate == [] and rep.minus_degenerate == []


def test_example_data_zero_components(example_data):
    rep = check_nondegeneracy(example_data, (-10.0, 10.0))
    # phi_lin_u = -delta (u - 2) vanishes only at u = 2, likewise phi_lin_v at v = 2
    assert rep.component_count == 2


def test_degenerate_data_has_wide_zero_interval():
    rep = check_nondegeneracy(degenerate_data(), (-6.0, 6.0))
    assert any(b - a > 1.0 for a, b in rep.plus_degenerate)
    assert np.all(lin_u(degenerate_data(), np.linspace(-6, 2.9, 50)) == 0)


def test_nondegeneracy_rejects_bad_tolerance(example_data):
    with pytest.raises(ValueError):
        check_nondegeneracy(example_data, (-1, 1), tol=0.0)


def test_time_reversal_of_data():
    data = smalldata_data()
    rev = data.time_reversed()
    for t, x in ((0.5, 0.3), (1.7, -2.0)):
        assert dalembert(rev, CartesianPoint(t, x)) == pytest.approx(
            dalembert(data, CartesianPoint(-t, x)), abs=1e-12)


def test_small_data_stays_below_half():
    data = smalldata_data()
    T, X = NullLattice(Diamond(4.0, 4.0, 8.0), 161).cartesian_mesh()
    assert np.max(np.abs(dalembert_grid(data, T, X))) <= 0.5


def test_spline_data_reproduces_samples():
    x = np.linspace(-2, 2, 41)
    data = spline_data(x, 0.3 * np.cos(x), 0.1 * np.sin(x), 2.0)
    assert np.allclose(data.phi0(x), 0.3 * np.cos(x), atol=1e-14)
    assert np.all(data.phi0(np.array([2.5, -3.0])) == 0)


def test_periodic_wrapper_is_not_cut():
    data = closed_form_data(np.sin, zeros, np.cos, 1.0, periodic_length=2 * math.pi)
    assert data.phi0(np.array([3.0]))[0] == pytest.approx(math.sin(3.0))
