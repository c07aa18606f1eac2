import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy.special import iv

from shapelab.density import ShiftDensity
from shapelab.errors import NonIdentifiableWarning
from shapelab.identifiability import (PHASE_CONSTANT, PHASE_SAFETY, bessel_A, bessel_A_array, bessel_A_quadrature,
                                      bessel_equivalents_check, bessel_nth_derivative_at_zero_over_pi,
                                      bessel_series_coefficient, build_bessel_table, calibrate_phase_constant,
                                      identifiability_quadratic_form, lower_bound_integral_In,
                                      theta1_disk_lower_bound, thetak_phase_lower_bound)


# -------------------------------------------------------------------- Bessel

@pytest.mark.parametrize("n", [0, 1, 2, 7, 20])
@pytest.mark.parametrize("a", [0.01, 0.5, 2.0, 10.0, 50.0])
def test_series_matches_scipy_modified_bessel(n, a):
    ref = 2 * math.pi * iv(n, a)
    assert bessel_A(n, a) == pytest.approx(ref, rel=1e-13)
    assert bessel_A(-n, a) == bessel_A(n, a)


def test_array_version_agrees_with_scalar():
    a = np.array([0.0, 0.1, 1.0, 7.5, 300.0])
    for n in (0, 3, 12):
        assert np.allclose(bessel_A_array(n, a), [bessel_A(n, x) for x in a], rtol=1e-14, atol=0)


def test_series_and_quadrature_table_agree():
    table = build_bessel_table(20, [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
    assert np.max(table.rel_err) < 1e-12
    rows = list(table.rows())
    assert len(rows) == 21 * 7 and rows[0][:2] == (0, 0.01)


def test_quadrature_keeps_relative_accuracy_deep_in_the_tail():
    # A_30(0.01) is near 1e-100; the plain trapezoid rule would return rounding noise
    ref = float(2 * mpmath.pi * mpmath.besseli(30, mpmath.mpf("0.01")))
    assert bessel_A_quadrature(30, 0.01) == pytest.approx(ref, rel=1e-12)


def test_edge_values_and_guards():
    assert bessel_A(0, 0.0) == 2 * math.pi and bessel_A(4, 0.0) == 0.0
    with pytest.raises(ValueError):
        bessel_A(1, -1.0)
    with pytest.raises(OverflowError):
        bessel_A(1, 701.0)


@pytest.mark.parametrize("n", [1, 2, 3, 6, 10])
def test_exact_derivative_at_zero(n):
    assert bessel_nth_derivative_at_zero_over_pi(n) == Fraction(2, 2 ** n)
    with mpmath.workdps(40):
        numeric = mpmath.diff(lambda x: 2 * mpmath.besseli(n, x), 0, n)
    assert float(numeric) == pytest.approx(2.0 ** (1 - n), rel=1e-20)
    assert bessel_series_coefficient(n, 1) == Fraction(2, 2 ** (n + 2) * math.factorial(n + 1))


def test_small_and_large_argument_equivalents():
    small = bessel_equivalents_check(5, 0.01)
    assert small.small_deviation == pytest.approx(0.01 ** 2 / (4 * 6), rel=1e-3)
    assert math.isnan(small.ratio_large_a)
    big = bessel_equivalents_check(3, 600.0)
    # first correction of the large-argument expansion is -(4 n^2 - 1)/(8 a)
    assert big.ratio_large_a - 1 == pytest.approx(-(4 * 9 - 1) / (8 * 600), rel=0.05)
    assert math.isnan(bessel_equivalents_check(3, 5.0).ratio_small_a)
    with pytest.raises(ValueError):
        bessel_equivalents_check(0, 1.0)


# ------------------------------------------------------------- I_n integrals

def In_reference(n, theta1):
    # arbitrary-precision quadrature of the same integral, written independently
    with mpmath.workdps(25):
        t = mpmath.mpf(theta1)
        f = lambda r: r * mpmath.exp(-(r + t) ** 2) * (2 * mpmath.pi * mpmath.besseli(n, 2 * r * t)) ** 2
        return float(mpmath.quad(f, [0, 1, 3, 8, 20, 60]))


@pytest.mark.parametrize("n", [0, 1, 5, 30])
@pytest.mark.parametrize("theta1", [0.5, 1.0, 2.0])
def test_In_matches_arbitrary_precision_quadrature(n, theta1):
    assert lower_bound_integral_In(n, theta1) == pytest.approx(In_reference(n, theta1), rel=1e-12)


def test_In_domain():
    for t in (0.0, -1.0, 10.5):
        with pytest.raises(ValueError):
            lower_bound_integral_In(1, t)


def test_quadratic_form_by_hand():
    g = ShiftDensity.from_fourier({1: 0.2, 2: 0.1j}, 256)
    assert identifiability_quadratic_form(1.0, g, g, 8) == 0.0
    h = ShiftDensity.uniform(256)
    q = identifiability_quadratic_form(1.0, g, h, 8)
    expected = (2 * 0.2 ** 2 * lower_bound_integral_In(1, 1.0)
                + 2 * 0.1 ** 2 * lower_bound_integral_In(2, 1.0)) / (8 * math.pi ** 2)
    assert q == pytest.approx(expected, rel=1e-10)


# ------------------------------------------------------------- lower bounds

@pytest.mark.parametrize("t, ref", [(1.2, 1.0), (0.9, 1.0), (2.3, 2.0), (0.45, 0.4)])
def test_first_coefficient_floor_holds(t, ref):
    g = ShiftDensity.from_fourier({1: 0.2}, 256)
    h = ShiftDensity.from_fourier({2: 0.1}, 256)
    tv, floor = theta1_disk_lower_bound(t, ref, g, h)
    assert floor > 0 and tv >= floor


def test_first_coefficient_floor_preconditions():
    g = ShiftDensity.uniform(64)
    for t, ref in ((1.0, 1.0), (2.0, 1.0), (-0.1, 0.05)):
        with pytest.raises(ValueError):
            theta1_disk_lower_bound(t, ref, g, g)


def test_phase_constant_is_calibrated_with_safety_factor():
    calibrated = calibrate_phase_constant()
    assert calibrated / PHASE_SAFETY - 0.01 < PHASE_CONSTANT <= calibrated / PHASE_SAFETY


@pytest.mark.parametrize("modulus", [0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("gap", [0.1, 1.0, 3.0])
def test_phase_floor_holds(modulus, gap):
    g = ShiftDensity.from_fourier({1: 0.25, 2: 0.1 - 0.1j}, 256)
    for k in (1, 2):
        ref = modulus * np.exp(0.3j)
        tv, floor = thetak_phase_lower_bound(k, ref * np.exp(1j * gap), ref, g)
        assert 0 < floor <= tv


def test_phase_bound_edge_cases():
    g = ShiftDensity.from_fourier({1: 0.25}, 128)
    assert thetak_phase_lower_bound(1, 1.0, 1.0, g) == (0.0, 0.0)
    with pytest.raises(ValueError):
        thetak_phase_lower_bound(1, 2.0, 1.0, g)
    with pytest.warns(NonIdentifiableWarning):
        tv, floor = thetak_phase_lower_bound(2, 1j, 1.0, g)
    assert floor == 0.0 and tv >= 0
