"""Distances between mixture laws P_{f,g} and between shift densities.

Conventions: TV = 1/2 int |p - q|; Hellinger d_H^2 = int (sqrt p - sqrt q)^2,
so 0 <= d_TV <= d_H <= sqrt(2). Points of the complex plane carry the
density exp(-|z|^2)/pi, hence two unit complex Gaussians with mean gap delta
are at TV erf(|delta|/2) and squared Hellinger 2 - 2 exp(-|delta|^2/4).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, ive

from .density import ShiftDensity
from .fourier import FourierSeries, norms
from .model import mixture_log_density, sample_mixture

QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"
MC_CHUNK = 8192


@dataclass(frozen=True)
class MixtureLaw:
    f: FourierSeries
    g: ShiftDensity


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: float
    method: str
    refinement_delta: float | None = None
    budget: int | None = None

    def __float__(self):
        return self.value


# ------------------------------------------------------------ shift densities

def _cdf_knots(g: ShiftDensity):
    """Breakpoints and CDF values of g read as constant on cells centred at nodes."""
    M = g.M
    t = np.concatenate([[0.0], (np.arange(M) + 0.5) / M, [1.0]])
    dens = np.concatenate([[g.values[0]], g.values[1:], [g.values[0]]])
    widths = np.diff(t)
    G = np.concatenate([[0.0], np.cumsum(dens * widths)])
    return t, G / G[-1]


def w1_distance(g: ShiftDensity, h: ShiftDensity) -> float:
    """Wasserstein-1 distance on the segment [0, 1].

    Computed as int_0^1 |G(t) - H(t)| dt, which equals the quantile-coupling
    integral int_0^1 |G^{-1}(u) - H^{-1}(u)| du. Both CDFs are piecewise
    linear, so the integral is exact on the merged breakpoints.
    """
    ta, Ga = _cdf_knots(g)
    tb, Gb = _cdf_knots(h)
    t = np.union1d(ta, tb)
    d = np.interp(t, ta, Ga) - np.interp(t, tb, Gb)
    return float(_abs_piecewise_linear_integral(t, d))


def _abs_piecewise_linear_integral(t, d):
    h = np.diff(t)
    d0, d1 = d[:-1], d[1:]
    same = d0 * d1 >= 0
    s = np.abs(d0) + np.abs(d1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cross = np.where(s > 0, (d0 ** 2 + d1 ** 2) / np.where(s > 0, s, 1.0), 0.0)
    return np.sum(np.where(same, 0.5 * h * s, 0.5 * h * cross))


def tv_densities(g: ShiftDensity, h: ShiftDensity) -> float:
    """1/2 int |g - h| by the node rule."""
    if g.M != h.M:
        raise ValueError("densities must share a grid")
    return 0.5 * float(np.mean(np.abs(g.values - h.values)))


# --------------------------------------------------------------- closed forms

def gaussian_tv(delta) -> float:
    """TV between unit complex Gaussians (any dimension) whose means differ by delta."""
    return float(erf(np.linalg.norm(np.atleast_1d(delta)) / 2.0))


def gaussian_hellinger(delta) -> float:
    d2 = np.linalg.norm(np.atleast_1d(delta)) ** 2
    return float(math.sqrt(max(0.0, 2.0 - 2.0 * math.exp(-d2 / 4.0))))


# ------------------------------------------------------------- marginal (2-D)

def _marginal_density_polar(theta: complex, k: int, g: ShiftDensity, r, n_angular: int):
    """Density of the frequency-k coefficient on a polar grid (rows r, columns angle).

    exp(2 r |theta| cos(.)) is expanded in modified Bessel functions, which
    turns the shift integral into the moments c_{-nk}(g) of the discrete
    measure carried by the density nodes.
    """
    rho, psi = abs(theta), np.angle(theta)
    alpha = 2 * np.pi * np.arange(n_angular) / n_angular
    if g.is_point_mass():
        phi0 = np.flatnonzero(g.values)[0] / g.M
        mu = theta * np.exp(-2j * np.pi * k * phi0)
        z = np.multiply.outer(r, np.exp(1j * alpha))
        return np.exp(-np.abs(z - mu) ** 2) / np.pi
    n = np.fft.fftfreq(n_angular, 1.0 / n_angular).astype(int)
    a = 2.0 * r * rho
    spec = g.spectrum()
    mom = spec[(-n * k) % g.M] * np.exp(-1j * n * psi)
    C = ive(np.abs(n)[None, :], a[:, None]) * mom[None, :]
    vals = np.real(np.fft.ifft(C, axis=1)) * n_angular
    return vals * (np.exp(-(r - rho) ** 2) / np.pi)[:, None]


def _angular_nodes(a_max: float, n_angular: int) -> int:
    while n_angular < 1 << 16 and ive(n_angular // 2, a_max) > 1e-18:
        n_angular *= 2
    return n_angular


def _tv_marginal_once(k, ta, tb, ga, gb, n_radial, n_angular):
    R = max(abs(ta), abs(tb)) + 6.0
    r = (np.arange(n_radial) + 0.5) * (R / n_radial)
    na = _angular_nodes(2 * R * max(abs(ta), abs(tb)), n_angular)
    pa = _marginal_density_polar(ta, k, ga, r, na)
    pb = _marginal_density_polar(tb, k, gb, r, na)
    d = pa - pb
    d1 = np.roll(d, -1, axis=1)
    # exact integral of |linear interpolant| on each angular cell; handles sign changes
    s = np.abs(d) + np.abs(d1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cell_int = np.where(d * d1 >= 0, 0.5 * s, 0.5 * (d * d + d1 * d1) / np.where(s > 0, s, 1.0))
    ang = cell_int.sum(axis=1) * (2 * np.pi / na)
    return 0.5 * float(np.sum(ang * r) * (R / n_radial))


def tv_marginal(k: int, a: MixtureLaw, b: MixtureLaw, n_radial: int = 512, n_angular: int = 2048,
                refinement_check: bool = True) -> DistanceEstimate:
    """TV between the laws of the frequency-k coefficient by polar quadrature.

    Midpoint rule in radius on [0, max|theta_k| + 6], trapezoid in angle.
    With ``refinement_check`` the value at half resolution is also computed
    and the absolute change is reported as ``refinement_delta``.
    """
    ta, tb = a.f[k], b.f[k]
    if ta == tb and a.g.M == b.g.M and np.array_equal(a.g.values, b.g.values):
        return DistanceEstimate(0.0, 0.0, QUADRATURE, 0.0 if refinement_check else None)
    v = _tv_marginal_once(k, ta, tb, a.g, b.g, n_radial, n_angular)
    delta = None
    if refinement_check:
        v2 = _tv_marginal_once(k, ta, tb, a.g, b.g, n_radial // 2, n_angular // 2)
        delta = abs(v - v2)
    return DistanceEstimate(min(max(v, 0.0), 1.0), 0.0, QUADRATURE, delta)


# ---------------------------------------------------------------- joint laws

def _same_law(a: MixtureLaw, b: MixtureLaw) -> bool:
    K = max(a.f.K, b.f.K)
    return (np.array_equal(a.f.with_cutoff(K).coeffs, b.f.with_cutoff(K).coeffs)
            and a.g.M == b.g.M and np.array_equal(a.g.values, b.g.values))


def _quadrature_reduction(a: MixtureLaw, b: MixtureLaw):
    """Reduce the joint TV to a closed form or a single marginal when possible.

    Returns ('gauss', delta_vector) or ('marginal', k), or None.
    """
    K = max(a.f.K, b.f.K)
    fa, fb = a.f.with_cutoff(K), b.f.with_cutoff(K)
    l = fa.frequencies
    if a.g.is_point_mass() and b.g.is_point_mass():
        pa = np.flatnonzero(a.g.values)[0] / a.g.M
        pb = np.flatnonzero(b.g.values)[0] / b.g.M
        mu_a = fa.coeffs * np.exp(-2j * np.pi * l * pa)
        mu_b = fb.coeffs * np.exp(-2j * np.pi * l * pb)
        return "gauss", mu_a - mu_b
    d0 = fa[0] - fb[0]
    moving = (l != 0) & ((fa.coeffs != 0) | (fb.coeffs != 0))
    g_equal = a.g.M == b.g.M and np.array_equal(a.g.values, b.g.values)
    rest_equal = (not np.any(moving)) or (g_equal and np.array_equal(fa.coeffs[moving], fb.coeffs[moving]))
    if rest_equal:
        return "gauss", np.array([d0])
    if d0 == 0 and int(np.sum(moving)) == 1:
        return "marginal", int(l[moving][0])
    return None


def _mc_stat(a: MixtureLaw, b: MixtureLaw, budget: int, rng, workers: int, Q, kind: str):
    """Stratified importance sampling from the balanced mixture (P_a + P_b)/2.

    With Delta = log p_a - log p_b the integrands are
    TV: |tanh(Delta/2)|,  squared Hellinger: 2 (1 - 1/cosh(Delta/2)).
    Returns (mean, stderr, n_used).
    """
    K = max(a.f.K, b.f.K)
    fa, fb = a.f.with_cutoff(K), b.f.with_cutoff(K)
    rng = np.random.default_rng(rng)
    base = int(rng.integers(2 ** 62))
    n_chunks = max(1, int(math.ceil(budget / MC_CHUNK)))
    half = max(1, int(math.ceil(budget / (2 * n_chunks))))

    def stat(delta):
        if kind == "tv":
            return np.abs(np.tanh(0.5 * delta))
        return 2.0 * (1.0 - 1.0 / np.cosh(0.5 * delta))

    def job(c):
        r = np.random.default_rng([base, c])
        za = sample_mixture(fa, a.g, half, r, K)
        zb = sample_mixture(fb, b.g, half, r, K)
        Z = np.vstack([za, zb])
        delta = mixture_log_density(Z, fa, a.g, Q) - mixture_log_density(Z, fb, b.g, Q)
        s = stat(delta)
        return s[:half], s[half:]

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, range(n_chunks)))
    else:
        parts = [job(c) for c in range(n_chunks)]
    sa = np.concatenate([p[0] for p in parts])
    sb = np.concatenate([p[1] for p in parts])
    mean = 0.5 * (sa.mean() + sb.mean())
    se = 0.5 * math.sqrt(sa.var(ddof=1) / sa.size + sb.var(ddof=1) / sb.size)
    return float(mean), float(se), int(sa.size + sb.size)


def tv_joint(a: MixtureLaw, b: MixtureLaw, method: str = "auto", budget: int = 200_000,
             rng=None, workers: int = 1, Q: int | None = None) -> DistanceEstimate:
    """Total variation between P_{f_a,g_a} and P_{f_b,g_b}.

    ``method='quadrature'`` is available when the pair reduces to Gaussians
    (point-mass shifts or only frequency 0 differing) or to one moving
    frequency; ``'auto'`` uses it when possible and Monte Carlo otherwise.
    """
    if _same_law(a, b):
        return DistanceEstimate(0.0, 0.0, QUADRATURE if method != MONTE_CARLO else MONTE_CARLO)
    if method in ("auto", QUADRATURE):
        red = _quadrature_reduction(a, b)
        if red is not None:
            if red[0] == "gauss":
                return DistanceEstimate(gaussian_tv(red[1]), 0.0, QUADRATURE)
            return tv_marginal(red[1], a, b)
        if method == QUADRATURE:
            raise ValueError("pair has no quadrature reduction; use method='monte-carlo'")
    elif method != MONTE_CARLO:
        raise ValueError(f"unknown method {method!r}")
    m, se, used = _mc_stat(a, b, budget, rng, workers, Q, "tv")
    return DistanceEstimate(min(max(m, 0.0), 1.0), se, MONTE_CARLO, budget=used)


def hellinger_joint(a: MixtureLaw, b: MixtureLaw, budget: int = 200_000, rng=None,
                    workers: int = 1, Q: int | None = None, method: str = MONTE_CARLO) -> DistanceEstimate:
    """Hellinger distance; Monte Carlo on the symmetric form int (sqrt p - sqrt q)^2."""
    if _same_law(a, b):
        return DistanceEstimate(0.0, 0.0, method)
    if method == QUADRATURE:
        red = _quadrature_reduction(a, b)
        if red is None or red[0] != "gauss":
            raise ValueError("closed-form Hellinger needs a Gaussian reduction")
        return DistanceEstimate(gaussian_hellinger(red[1]), 0.0, QUADRATURE)
    m2, se2, used = _mc_stat(a, b, budget, rng, workers, Q, "hellinger")
    m2 = max(m2, 0.0)
    h = math.sqrt(m2)
    se = se2 / (2 * h) if h > 0 else 0.0
    return DistanceEstimate(min(h, math.sqrt(2.0)), se, MONTE_CARLO, budget=used)


# --------------------------------------------------------------- bound checks

def check_shape_tv_bound(f: FourierSeries, f_alt: FourierSeries, g: ShiftDensity,
                        budget: int = 200_000, rng=None, method: str = "auto", workers: int = 1):
    """(tv estimate, bound) for TV(P_{f,g}, P_{f_alt,g}) <= ||f - f_alt|| / sqrt 2."""
    tv = tv_joint(MixtureLaw(f, g), MixtureLaw(f_alt, g), method, budget, rng, workers)
    bound = norms(f - f_alt).l2 / math.sqrt(2.0)
    return tv, bound


def check_shift_tv_chain(f: FourierSeries, g: ShiftDensity, g_alt: ShiftDensity,
                       budget: int = 200_000, rng=None, method: str = "auto", workers: int = 1):
    """(tv, w1_bound, tv_bound, l2_bound) for the shift-density chain of bounds.

    tv <= sqrt2 pi ||f||_H1 W1(g, g') <= sqrt2 pi ||f||_H1 TV(g, g')
       <= pi ||f||_H1 ||g - g'|| / sqrt2.
    """
    tv = tv_joint(MixtureLaw(f, g), MixtureLaw(f, g_alt), method, budget, rng, workers)
    h1 = norms(f).h1
    c = math.sqrt(2.0) * math.pi * h1
    return (tv, c * w1_distance(g, g_alt), c * tv_densities(g, g_alt),
            math.pi * h1 * g.l2_distance(g_alt) / math.sqrt(2.0))
