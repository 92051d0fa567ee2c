import math

import numpy as np
import pytest
from pytest import approx

from critforest.scaling.errors import DomainError
from critforest.scaling.stable_density import (
    GDensityGrid, QuadratureConfig, cdf_g, eval_g, eval_g_array, eval_g_tanh_sinh, g_zero_closed_form,
    integrate_g, log_eval_g, right_tail,
)


def test_value_at_zero():
    assert eval_g(0.0) == approx(g_zero_closed_form(), abs=1e-9)
    assert g_zero_closed_form() == approx(0.1630, abs=1e-4)


@pytest.mark.parametrize('x', [-3.0, -1.5, -0.4, 0.7, 2.0, 3.5])
def test_two_schemes_agree(x):
    assert eval_g(x) == approx(eval_g_tanh_sinh(x), abs=1e-9)


def test_normalization():
    tail = 2 / 3 * math.sqrt(2 / math.pi) * 60.0 ** -1.5
    assert integrate_g(-10.0, 60.0) + tail == approx(1.0, abs=1e-5)
    assert integrate_g(-math.inf, math.inf) == 1.0
    # mean zero and no negative jumps: P(X < 0) = 1 / alpha
    assert cdf_g(0.0) == approx(2 / 3, abs=1e-8)
    assert cdf_g(-math.inf) == 0.0
    assert integrate_g(1.0, 1.0) == 0.0


def test_integral_matches_cdf():
    assert integrate_g(-1.0, 2.0) == approx(cdf_g(2.0) - cdf_g(-1.0), abs=1e-8)
    with pytest.raises(DomainError):
        integrate_g(2.0, 1.0)


def test_positive_and_decaying():
    xs = np.array([-8.0, -4.0, -2.0, 0.0, 2.0, 8.0, 30.0])
    values = eval_g_array(xs)
    assert np.all(values > 0)
    assert values[0] < values[1] < values[2]
    assert values[-1] < values[-2]


def test_right_tail():
    assert eval_g(200.0) / right_tail(200.0) == approx(1.0, abs=0.01)


def test_left_tail_in_log_space():
    log_value = log_eval_g(-20.0)
    assert math.isfinite(log_value)
    assert log_value == approx(-(20.0 ** 3) / 24, abs=10)
    assert eval_g(-20.0) == approx(math.exp(log_value), rel=1e-6, abs=1e-300)


@pytest.mark.parametrize('x', [-80.0, -300.0, -1000.0])
def test_far_left_tail(x):
    # saddle point: log g(x) = -|x|^3/24 + log(|x| / 8 pi) / 2 + O(|x|^-3)
    expected = -abs(x) ** 3 / 24 + 0.5 * math.log(abs(x) / (8 * math.pi))
    assert log_eval_g(x) == approx(expected, abs=1e-4)
    assert log_eval_g(x, QuadratureConfig.hot()) == approx(expected, abs=1e-4)


def test_bad_arguments():
    with pytest.raises(DomainError):
        eval_g(math.nan)
    with pytest.raises(DomainError):
        QuadratureConfig(abs_tol=1e-10, truncation_tail=1e-9)
    with pytest.raises(DomainError):
        QuadratureConfig(max_subdivisions=0)


def test_grid_interpolates():
    grid = GDensityGrid.build(-2.0, 2.0, 0.05, QuadratureConfig.hot())
    assert grid.bounds == (-2.0, 2.0)
    for x in (-1.234, 0.01, 1.777):
        assert grid(x) == approx(eval_g(x), rel=1e-5)
    assert grid(3.0) == approx(eval_g(3.0), rel=1e-6)
