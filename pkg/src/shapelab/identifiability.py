"""Bessel integrals and lower bounds on marginal total variation.

A_n(a) = int_0^{2 pi} exp(a cos u) cos(n u) du = 2 pi I_n(a). The marginal
law of one Fourier coefficient is a rotation mixture, and its TV against
another such mixture is bounded below through the integrals

    I_n(theta_1) = int_0^inf rho exp(-(rho + theta_1)^2) A_n(2 rho theta_1)^2 drho.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .density import ShiftDensity
from .distances import MixtureLaw, tv_marginal
from .errors import NonIdentifiableWarning
from .fourier import FourierSeries

A_MAX = 700.0
SERIES_RTOL = 1e-15


# -------------------------------------------------------------------- Bessel

def bessel_A(n: int, a: float) -> float:
    """2 pi I_n(a) by the ascending series, stopped when a term drops below 1e-15 of the sum."""
    n = abs(int(n))
    a = float(a)
    if a < 0:
        raise ValueError("a must be nonnegative")
    if a > A_MAX:
        raise OverflowError(f"a={a} exceeds the overflow guard {A_MAX}")
    if a == 0.0:
        return 2 * math.pi if n == 0 else 0.0
    half = 0.5 * a
    log_first = n * math.log(half) - math.lgamma(n + 1)
    if log_first < -745:
        return 0.0
    term = math.exp(log_first)
    total = term
    q = half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if term < SERIES_RTOL * total and k > q ** 0.5:
            break
    return 2 * math.pi * total


def bessel_A_array(n: int, a) -> np.ndarray:
    """Vectorized ascending series; same stopping rule as bessel_A."""
    n = abs(int(n))
    a = np.asarray(a, dtype=float)
    if np.any(a > A_MAX):
        raise OverflowError("argument exceeds overflow guard")
    half = 0.5 * a
    with np.errstate(divide="ignore"):
        log_first = n * np.log(np.where(half > 0, half, 1.0)) - math.lgamma(n + 1)
    term = np.exp(np.maximum(log_first, -745.0)) * (half > 0)
    total = term.copy()
    q = half * half
    k = 0
    while True:
        k += 1
        term = term * q / (k * (k + n))
        total += term
        if np.all(term <= SERIES_RTOL * total) and k * k > q.max():
            break
    out = 2 * math.pi * total
    if n == 0:
        out = np.where(a == 0, 2 * math.pi, out)
    return out


def bessel_A_quadrature(n: int, a: float, nodes: int = 4096) -> float:
    """Periodic trapezoid rule for the defining integral.

    The contour u -> u + i t with sinh t = n/a passes through the saddle
    point of exp(a cos u + i n u), so the terms no longer cancel and the
    rule keeps full relative accuracy for small a and large n.
    """
    n = abs(int(n))
    if a == 0:
        return 2 * math.pi if n == 0 else 0.0
    t = math.asinh(n / a)
    u = 2 * np.pi * np.arange(nodes) / nodes + 1j * t
    expo = a * np.cos(u) + 1j * n * u
    shift = float(np.max(expo.real))
    s = np.mean(np.exp(expo - shift))
    return float(2 * math.pi * s.real * math.exp(shift))


def bessel_series_coefficient(n: int, k: int) -> Fraction:
    """Coefficient of a^(n+2k) in A_n(a)/pi, as an exact fraction 2/(2^(n+2k) k! (k+n)!)."""
    return Fraction(2, 2 ** (n + 2 * k) * math.factorial(k) * math.factorial(k + n))


def bessel_nth_derivative_at_zero_over_pi(n: int) -> Fraction:
    """A_n^{(n)}(0)/pi from the series: n! times the leading coefficient, i.e. 2^(1-n)."""
    return math.factorial(n) * bessel_series_coefficient(n, 0)


@dataclass(frozen=True)
class BesselTable:
    n_max: int
    a_grid: np.ndarray
    series: np.ndarray      # shape (n_max+1, len(a_grid))
    quadrature: np.ndarray
    rel_err: np.ndarray

    def rows(self):
        for n in range(self.n_max + 1):
            for j, a in enumerate(self.a_grid):
                yield n, float(a), float(self.series[n, j]), float(self.quadrature[n, j]), float(self.rel_err[n, j])


def build_bessel_table(n_max: int, a_grid, nodes: int = 4096) -> BesselTable:
    a_grid = np.asarray(a_grid, dtype=float)
    S = np.array([[bessel_A(n, a) for a in a_grid] for n in range(n_max + 1)])
    Qd = np.array([[bessel_A_quadrature(n, a, nodes) for a in a_grid] for n in range(n_max + 1)])
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(S != 0, np.abs(S - Qd) / np.abs(S), np.abs(Qd))
    return BesselTable(n_max, a_grid, S, Qd, rel)


@dataclass(frozen=True)
class BesselEquivalents:
    n: int
    a: float
    ratio_small_a: float   # nan when a > sqrt(n)
    ratio_large_a: float   # nan when a < 4 n^2

    @property
    def small_deviation(self) -> float:
        return abs(self.ratio_small_a - 1.0)

    @property
    def large_deviation(self) -> float:
        return abs(self.ratio_large_a - 1.0)


def bessel_equivalents_check(n: int, a: float) -> BesselEquivalents:
    """Ratios of A_n to its small-a and large-a equivalents.

    small: A_n(a) n! / (2 pi (a/2)^n), reported for a <= sqrt(n);
    large: A_n(a) sqrt(2 pi a) / (2 pi e^a), reported for a >= 4 n^2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    A = bessel_A(n, a)
    small = large = float("nan")
    if 0 < a <= math.sqrt(n):
        small = math.exp(math.log(A) + math.lgamma(n + 1) - math.log(2 * math.pi) - n * math.log(a / 2))
    if a >= 4 * n * n:
        large = math.exp(math.log(A) + 0.5 * math.log(2 * math.pi * a) - math.log(2 * math.pi) - a)
    return BesselEquivalents(n, float(a), small, large)


# ----------------------------------------------------------- lower-bound pieces

def _In_integrand_log(n, theta1, rho):
    rho = np.asarray(rho, dtype=float)
    A = bessel_A_array(n, 2.0 * rho * theta1)
    with np.errstate(divide="ignore"):
        return np.log(rho) - (rho + theta1) ** 2 + 2.0 * np.log(A)


def lower_bound_integral_In(n: int, theta1: float, tail_rtol: float = 1e-16) -> float:
    """int_0^inf rho exp(-(rho + theta1)^2) A_n(2 rho theta1)^2 drho by adaptive quadrature.

    The upper limit starts at max(40/theta1, max(theta1, sqrt(n+1)) + 12) and
    is pushed out until the Gaussian tail bound (from A_n(x) <= 2 pi e^x) is
    below tail_rtol times the value.
    """
    if not (0 < theta1 <= 10):
        raise ValueError("theta1 must lie in (0, 10]")
    n = abs(int(n))
    R = max(40.0 / theta1, max(theta1, math.sqrt(n + 1)) + 12.0)
    grid = np.linspace(0.0, R, 4001)[1:]
    lg = _In_integrand_log(n, theta1, grid)
    peak = float(grid[int(np.argmax(lg))])
    scale = float(np.max(lg))

    def integrand(r):
        if r <= 0:
            return 0.0
        return math.exp(float(_In_integrand_log(n, theta1, [r])[0]) - scale)

    val, _ = quad(integrand, 0.0, R, points=[peak], epsabs=0.0, epsrel=1e-13, limit=400)
    value = val * math.exp(scale)
    # tail beyond R: int_R^inf 4 pi^2 rho exp(-(rho - theta1)^2) drho
    while True:
        x = R - theta1
        tail = 4 * math.pi ** 2 * (0.5 * math.exp(-x * x) + 0.5 * math.sqrt(math.pi) * theta1 * math.erfc(x))
        if tail <= tail_rtol * value or x > 60:
            break
        extra, _ = quad(integrand, R, R + 10.0, epsabs=0.0, epsrel=1e-13, limit=200)
        value += extra * math.exp(scale)
        R += 10.0
    return value


def identifiability_quadratic_form(theta1: float, g: ShiftDensity, g_alt: ShiftDensity, N: int) -> float:
    """(1/8 pi^2) sum_{|n|<=N} |c_n(g - g_alt)|^2 I_|n|(theta1)."""
    if theta1 <= 0:
        raise ValueError("theta1 must be positive")
    if g.M != g_alt.M:
        raise ValueError("densities must share a grid")
    N = min(N, g.K_g)
    diff = g.spectrum() - g_alt.spectrum()
    total = 0.0
    for n in range(0, N + 1):
        w = abs(diff[n]) ** 2 + (abs(diff[-n]) ** 2 if n else 0.0)
        # rounding-level coefficients contribute below 1e-22; skip their integrals
        if w > 1e-24:
            total += w * lower_bound_integral_In(n, theta1)
    return total / (8 * math.pi ** 2)


def _single(k, theta):
    return FourierSeries.from_dict({k: theta})


def theta1_disk_lower_bound(theta1: float, theta1_ref: float, g: ShiftDensity, g_alt: ShiftDensity,
                            **quad_kw):
    """(measured TV, cubic floor) for first-coefficient marginals.

    The floor integrates the density gap over the disk of radius
    eta/4 centred at 0, eta = |theta1 - theta1_ref|:
    (eta^2/32) |exp(-(3 ref + t)^2/16) - exp(-(3 t + ref)^2/16)|.
    """
    eta = abs(theta1 - theta1_ref)
    if not (theta1 > 0 and theta1_ref > 0 and 0 < eta < theta1_ref / 2):
        raise ValueError("need 0 < |theta1 - theta1_ref| < theta1_ref/2 with both positive")
    tv = tv_marginal(1, MixtureLaw(_single(1, theta1), g), MixtureLaw(_single(1, theta1_ref), g_alt), **quad_kw)
    floor = eta ** 2 / 32 * abs(math.exp(-(3 * theta1_ref + theta1) ** 2 / 16)
                                - math.exp(-(3 * theta1 + theta1_ref) ** 2 / 16))
    return tv.value, floor


# calibrate_phase_constant() / PHASE_SAFETY, rounded down. A factor 2 is not
# enough: as |theta| -> 0 the TV tends to |c_k| |dtheta| / sqrt(pi), which
# caps the constant at 64/sqrt(pi) ~ 36 for eta = 1/4.
PHASE_SAFETY = 4.0
PHASE_CONSTANT = 19.66
PHASE_ETA = 0.25


def calibrate_phase_constant(eta: float = PHASE_ETA) -> float:
    """Ratio TV / (eta^3 e^{-|theta|^2} |c_{-1}(g)| |dtheta|) on the reference case.

    Reference: k = 1, |theta| = 1, phase gap pi/2, g = 1 + 0.5 cos(2 pi tau).
    """
    g = ShiftDensity.from_fourier({1: 0.25}, 256)
    t0, t1 = 1.0 + 0j, complex(np.exp(0.5j * np.pi))
    tv = tv_marginal(1, MixtureLaw(_single(1, t1), g), MixtureLaw(_single(1, t0), g)).value
    return tv / (eta ** 3 * math.exp(-1.0) * abs(g.coef(-1)) * abs(t1 - t0))


def thetak_phase_lower_bound(k: int, theta: complex, theta_ref: complex, g_ref: ShiftDensity,
                             c: float = PHASE_CONSTANT, eta: float = PHASE_ETA, **quad_kw):
    """(measured TV, linear floor) for a pure phase change of the k-th coefficient.

    floor = c eta^3 exp(-|theta_ref|^2) |c_{-k}(g_ref)| |theta - theta_ref|.
    A vanishing c_{-k}(g_ref) makes the phase invisible in this marginal; a
    NonIdentifiableWarning is emitted and the floor is 0.
    """
    theta, theta_ref = complex(theta), complex(theta_ref)
    if not math.isclose(abs(theta), abs(theta_ref), rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("phase bound needs |theta| == |theta_ref|")
    if theta == theta_ref:
        return 0.0, 0.0
    ck = abs(g_ref.coef(-k))
    law_a = MixtureLaw(_single(k, theta), g_ref)
    law_b = MixtureLaw(_single(k, theta_ref), g_ref)
    tv = tv_marginal(k, law_a, law_b, **quad_kw).value
    if ck < 1e-12:
        warnings.warn(f"c_{{-{k}}}(g) vanishes: phase of theta_{k} not identifiable from this marginal",
                      NonIdentifiableWarning)
        return tv, 0.0
    floor = c * eta ** 3 * math.exp(-abs(theta_ref) ** 2) * ck * abs(theta - theta_ref)
    return tv, floor
