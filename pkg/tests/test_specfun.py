import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import airy_oracle, wright_oracle
from fracairy.specfun import (
    AccuracySpec,
    GammaPoleError,
    MittagLefflerOverflowError,
    SectorError,
    WrightArgs,
    gamma_fn,
    mittag_leffler,
    rgamma,
    wright,
    wright_integral_identity,
    wright_tail_bound,
)


@pytest.mark.parametrize("x, want", [(1, 1.0), (4, 6.0), (0.5, math.sqrt(math.pi))])
def test_gamma_values(x, want):
    assert gamma_fn(x) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("x", [0, -1, -7])
def test_gamma_poles_refused(x):
    with pytest.raises(GammaPoleError):
        gamma_fn(x)


def test_reciprocal_gamma_vanishes_at_poles():
    assert np.all(rgamma(np.array([0.0, -1.0, -2.0])) == 0)


def test_wright_at_zero_keeps_first_term():
    assert wright(-1 / 3, 2 / 3, 0.0) == pytest.approx(1 / math.gamma(2 / 3), rel=1e-14)


def test_wright_reduces_to_exponential():
    assert wright(0.0, 1.0, 1.0).real == pytest.approx(math.e, rel=1e-13)


def test_mainardi_closed_form():
    assert wright(-0.5, 0.5, -1.0).real == pytest.approx(math.exp(-0.25) / math.sqrt(math.pi), rel=1e-12)
    assert wright(-0.5, 0.5, -1.0).real == pytest.approx(wright_oracle(-0.5, 0.5, -1.0).real, rel=1e-12)


@pytest.mark.parametrize("y", [0.0, 1.0, 2.5, -1.5])
def test_wright_matches_airy(y):
    got = wright(-1 / 3, 2 / 3, -y).real
    want = 3 ** (2 / 3) * airy_oracle(y / 3 ** (1 / 3))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_invalid_lambda():
    with pytest.raises(ValueError):
        WrightArgs(-1.0, 0.5)
    with pytest.raises(ValueError):
        wright(-1.2, 0.5, 1.0)


def test_accuracy_spec_validation():
    with pytest.raises(ValueError):
        AccuracySpec(abs_tol=0)
    with pytest.raises(ValueError):
        AccuracySpec(max_terms=0)


@settings(max_examples=60, deadline=None)
@given(
    lam=st.floats(-0.333, -0.01),
    mu=st.floats(0.01, 2.0),
    r=st.floats(0.0, 30.0),
    ray=st.sampled_from([math.pi, 2 * math.pi / 3, -2 * math.pi / 3]),
)
def test_wright_against_extended_precision(lam, mu, r, ray):
    z = r * complex(math.cos(ray), math.sin(ray))
    got = complex(wright(lam, mu, z))
    want = wright_oracle(lam, mu, z)
    assert abs(got - want) <= 1e-9 * (1 + abs(want))


@pytest.mark.parametrize("lam, mu, z", [(-1 / 6, 5 / 6, -3.0), (-0.25, 0.75, 2 + 1j), (-0.1, 1.0, -10.0)])
def test_derivative_identity(lam, mu, z):
    h = 1e-5
    fd = (wright(lam, mu, z + h) - wright(lam, mu, z - h)) / (2 * h)
    assert abs(fd - wright(lam, lam + mu, z)) < 1e-6


def test_wright_vectorized_shape():
    z = np.linspace(-5, 5, 7).reshape(7, 1)
    assert wright(-1 / 6, 2 / 3, z).shape == (7, 1)


def test_tail_bound_dominates_and_decays():
    vals = [wright_tail_bound(-1 / 6, 5 / 6, -r) for r in (5.0, 20.0, 60.0, 200.0)]
    assert vals == sorted(vals, reverse=True)
    assert vals[-1] < 1e-30
    for r in (5.0, 20.0, 40.0):
        assert abs(wright_oracle(-1 / 6, 5 / 6, -r)) <= wright_tail_bound(-1 / 6, 5 / 6, -r)


def test_tail_bound_sector():
    z = 3 * np.exp(2j * np.pi / 3)
    # |arg z| = 2 pi / 3 > (1 + 1/5) pi / 2 for alpha = 0.6
    assert wright_tail_bound(-0.2, 0.4, z) > 0
    with pytest.raises(SectorError):
        wright_tail_bound(-0.2, 0.4, 3.0)


@pytest.mark.parametrize("lam", [0.1, 1 / 6, 0.25])
@pytest.mark.parametrize("mu", [2 / 3, 5 / 6, 1.0])
def test_integral_identity_grid(lam, mu):
    numeric, analytic = wright_integral_identity(lam, mu, -1.0)
    assert abs(numeric - analytic) < 1e-6


def test_integral_identity_known_values():
    numeric, analytic = wright_integral_identity(1 / 6, 5 / 6, -1.0)
    assert analytic == pytest.approx(1.0)
    numeric, analytic = wright_integral_identity(1 / 6, 1.0, -1.0)
    assert analytic == pytest.approx(1 / math.gamma(7 / 6), rel=1e-14)
    # 1 / Gamma(7/6) = 1.0779122..., the quadrature must land on it
    assert numeric == pytest.approx(1 / math.gamma(7 / 6), abs=1e-6)


def test_integral_identity_on_the_rotated_ray():
    a = np.exp(2j * np.pi / 3)
    numeric, analytic = wright_integral_identity(1 / 6, 5 / 6, a)
    assert abs(numeric - analytic) < 1e-6


def test_mittag_leffler_special_cases():
    assert mittag_leffler(1, 1, 1) == pytest.approx(math.e, rel=1e-13)
    assert mittag_leffler(0.7, 1.3, 0) == pytest.approx(1 / math.gamma(1.3), rel=1e-14)
    for z in np.linspace(-5, 5, 11):
        assert mittag_leffler(1, 1, z) == pytest.approx(math.exp(z), rel=1e-12, abs=1e-14)


def test_mittag_leffler_half_order():
    import mpmath

    with mpmath.workdps(40):
        want = float(mpmath.nsum(lambda n: mpmath.mpf(0.5) ** n * mpmath.rgamma(0.5 * n + 1), [0, mpmath.inf]))
    assert mittag_leffler(0.5, 1.0, 0.5) == pytest.approx(want, rel=1e-13)
    # E_{1/2}(-z) = exp(z^2) erfc(z)
    assert mittag_leffler(0.5, 1.0, -3.0) == pytest.approx(float(mpmath.exp(9) * mpmath.erfc(3)), rel=1e-10)


def test_mittag_leffler_overflow():
    with pytest.raises(MittagLefflerOverflowError):
        mittag_leffler(0.5, 1.0, 40.0)
