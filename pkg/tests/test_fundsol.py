import math

import numpy as np
import pytest

from conftest import kernel_oracle
from fracairy.fraccalc import TimeGrid
from fracairy.fundsol import (
    FundOrder,
    anchor_coefficient,
    eval_G,
    eval_G_dx,
    eval_V,
    eval_V_dx,
    order_shift_check,
    profile,
    profile_radius,
    profile_table,
)
from fracairy.potentials import profile_mass

SQ3 = math.sqrt(3.0)


@pytest.mark.parametrize("x", [-2.0, -0.3, 0.4, 1.7])
@pytest.mark.parametrize("t", [0.05, 0.6])
@pytest.mark.parametrize("sigma, mu", [(0.5, 1 / 3), (0.5, 5 / 6), (0.8, 0.4)])
def test_G_against_oracle(x, t, sigma, mu):
    got = eval_G(FundOrder(sigma, mu), x, t)
    assert got == pytest.approx(kernel_oracle("G", sigma, mu, x, t), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("r", [1, 2])
@pytest.mark.parametrize("x", [-1.2, 0.7])
def test_G_derivatives_against_oracle(r, x):
    order = FundOrder(0.5, 1 / 3)
    got = eval_G_dx(order, x, 0.3, r)
    assert got == pytest.approx(kernel_oracle("G", 0.5, 1 / 3, x, 0.3, r), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("r", [0, 1, 2])
def test_V_against_oracle(r):
    order = FundOrder(0.5, 1 / 3)
    got = eval_V(order, 0.9, 0.4) if r == 0 else eval_V_dx(order, 0.9, 0.4, r)
    assert got == pytest.approx(kernel_oracle("V", 0.5, 1 / 3, 0.9, 0.4, r), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("x", [-1.0, 0.8])
def test_x_derivatives_match_differences(x):
    order = FundOrder(0.6, 0.4)
    h = 1e-4
    for r in (1, 2, 3):
        lower = (lambda z: eval_G(order, z, 0.5)) if r == 1 else (lambda z: eval_G_dx(order, z, 0.5, r - 1))
        fd = (lower(x + h) - lower(x - h)) / (2 * h)
        assert eval_G_dx(order, x, 0.5, r) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_third_derivative_lowers_superscript_by_sigma():
    order = FundOrder(0.5, 1 / 3)
    x = np.array([-1.5, -0.2, 0.3, 2.0])
    assert np.allclose(eval_G_dx(order, x, 0.7, 3), eval_G(order.shifted(0.5), x, 0.7), rtol=1e-12)


def test_anchor_coefficients():
    assert anchor_coefficient("G", 0, "left") == pytest.approx(1 / 3)
    assert anchor_coefficient("G", 0, "right") == pytest.approx(1 / 3)
    assert anchor_coefficient("G", 1, "right") == pytest.approx(1 / 3)
    # the second derivative jumps by 1 across the anchor
    assert anchor_coefficient("G", 2, "left") - anchor_coefficient("G", 2, "right") == pytest.approx(1.0)
    assert anchor_coefficient("V", 0, "right") == pytest.approx(SQ3 / 6)
    assert anchor_coefficient("V", 1, "right") == pytest.approx(-SQ3 / 6)
    with pytest.raises(ValueError):
        anchor_coefficient("V", 0, "left")


def test_G_continuous_across_anchor():
    order = FundOrder(0.5, 1 / 3)
    at = eval_G(order, 0.0, 0.4)
    assert eval_G(order, -1e-9, 0.4) == pytest.approx(at, rel=1e-7)
    assert eval_G(order, 1e-9, 0.4) == pytest.approx(at, rel=1e-7)


def test_second_derivative_needs_side_at_anchor():
    order = FundOrder(0.5, 0.6)
    with pytest.raises(ValueError):
        eval_G_dx(order, 0.0, 0.4, 2)
    left = eval_G_dx(order, 0.0, 0.4, 2, side="left")
    right = eval_G_dx(order, 0.0, 0.4, 2, side="right")
    assert left == pytest.approx(eval_G_dx(order, -1e-7, 0.4, 2), rel=1e-4)
    assert right == pytest.approx(eval_G_dx(order, 1e-7, 0.4, 2), rel=1e-4)
    assert left - right == pytest.approx(0.4 ** (0.6 - 1 - 1 / 3) / math.gamma(0.6 - 1 / 3), rel=1e-12)


def test_invalid_orders_and_domains():
    with pytest.raises(ValueError):
        FundOrder(1.0, 0.5)
    with pytest.raises(ValueError):
        eval_V(FundOrder(0.5, 0.5), -1.0, 0.5)
    with pytest.raises(ValueError):
        eval_G(FundOrder(0.5, 0.5), 1.0, 0.0)
    with pytest.raises(ValueError):
        profile("G", FundOrder(0.5, 0.5), 1.0, r=4)


def test_profile_table_reproduces_profile():
    order = FundOrder(0.5, 1 / 3)
    tab = profile_table("G", order, 1)
    y = np.linspace(-tab.left + 1e-3, tab.right - 1e-3, 2001)
    y = y[y != 0]
    assert np.abs(tab(y) - profile("G", order, y, 1)).max() < 1e-12


def test_profile_negligible_beyond_radius():
    order = FundOrder(0.5, 1 / 3)
    left, right = profile_radius(order, 0, 1e-14)
    assert abs(profile("G", order, -left - 1.0)) < 1e-14
    assert abs(profile("G", order, right + 1.0)) < 1e-14


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
def test_initial_kernel_splits_its_mass_one_third_two_thirds(alpha):
    order = FundOrder(alpha, 1 - alpha / 3)
    assert profile_mass("G", order, 0, "left") == pytest.approx(1 / 3, abs=1e-10)
    assert profile_mass("G", order, 0, "right") == pytest.approx(2 / 3, abs=1e-10)


def test_left_mass_follows_gamma():
    order = FundOrder(0.5, 1 / 3)
    want = 1 / (3 * math.gamma(1 / 3 + 0.5 / 3))
    assert profile_mass("G", order, 0, "left") == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("x", [-1.0, 1.0])
def test_order_shift_on_a_coarse_grid(x):
    order = FundOrder(0.5, 1 / 3)
    grid = TimeGrid(1.0, 200)
    lhs, rhs = order_shift_check(order, 0.5 / 3, x, grid)
    assert np.abs(lhs - rhs)[1:].max() < 5e-3


def test_fractional_integral_raises_superscript():
    order = FundOrder(0.5, 1 / 3)
    grid = TimeGrid(1.0, 200)
    lhs, rhs = order_shift_check(order, -0.25, -1.0, grid)
    assert np.abs(lhs - rhs)[1:].max() < 5e-3
