import warnings

import numpy as np
import pytest
from scipy import stats

from shapelab.density import ShiftDensity
from shapelab.errors import InvalidDensityError, TruncationWarning
from shapelab.fourier import FourierSeries
from shapelab.model import (Dataset, generate_dataset, loglik_curve, loglik_dataset, mixture_log_density,
                            sample_shift)


def smooth_g(M=256):
    return ShiftDensity.from_fourier({1: 0.2 + 0.1j, 2: -0.1, 3: 0.05j}, M)


# ------------------------------------------------------------------ densities

def test_density_validation():
    with pytest.raises(InvalidDensityError):
        ShiftDensity(np.zeros(8))
    with pytest.raises(InvalidDensityError):
        ShiftDensity(np.full(8, 2.0))
    with pytest.raises(InvalidDensityError):
        ShiftDensity(np.r_[-1.0, np.full(7, 9 / 7)])
    g = smooth_g()
    assert g.values.mean() == pytest.approx(1.0, abs=1e-12)
    assert g.coef(1) == pytest.approx(0.2 + 0.1j, abs=1e-14)
    assert g.coef(-1) == pytest.approx(0.2 - 0.1j, abs=1e-14)


def test_density_resample_is_trig_interpolation():
    g = smooth_g(64)
    fine = g.resample(256)
    x = np.arange(256) / 256
    exact = 1 + 2 * np.real((0.2 + 0.1j) * np.exp(2j * np.pi * x) - 0.1 * np.exp(4j * np.pi * x)
                            + 0.05j * np.exp(6j * np.pi * x))
    assert np.allclose(fine, exact, atol=1e-12)


# ------------------------------------------------------------------ sampling

def test_sample_shift_delta_lands_in_its_bin():
    M = 64
    g = ShiftDensity.delta_at(M, 0.5)
    tau = sample_shift(g, 0, size=2000)
    assert np.all(np.abs(tau - 0.5) <= 0.5 / M)


def test_sample_shift_uniform_ks():
    tau = sample_shift(ShiftDensity.uniform(256), 1, size=10_000)
    assert stats.kstest(tau, "uniform").statistic < 0.02


def test_sample_shift_first_moment():
    g = smooth_g()
    tau = sample_shift(g, 2, size=100_000)
    z = np.exp(-2j * np.pi * tau)
    se = np.sqrt(np.var(z.real) / z.size + np.var(z.imag) / z.size)
    # jitter inside a cell damps c_1 by sinc(1/M)
    target = g.coef(1) * np.sinc(1 / g.M)
    assert abs(z.mean() - target) < 3 * se


def test_sample_shift_chi_square():
    g = smooth_g(32)
    tau = sample_shift(g, 3, size=100_000, jitter=False)
    counts = np.bincount(np.rint(tau * 32).astype(int) % 32, minlength=32)
    p = stats.chisquare(counts, g.weights * counts.sum()).pvalue
    assert p > 1e-3


def test_sample_shift_rejects_unnormalized():
    with pytest.raises(InvalidDensityError):
        sample_shift(np.ones(8), 0)


# ---------------------------------------------------------------- datasets

def test_pure_noise_variance():
    data = generate_dataset(FourierSeries.zeros(2), ShiftDensity.uniform(64), 10_000, 2, 5)
    var = np.mean(np.abs(data.Y) ** 2, axis=0)
    assert np.all(np.abs(var - 1.0) < 0.05)
    assert np.mean(data.Y.real ** 2) == pytest.approx(0.5, rel=0.05)


def test_zero_noise_and_delta_shift_reproduce_theta():
    f = FourierSeries.from_dict({-1: 0.5j, 0: 1.0, 2: 0.25})
    data = generate_dataset(f, ShiftDensity.delta(64, 0), 3, 2, 0, sigma=0.0)
    for c in data.curves:
        # a draw inside cell 0 is within 1/128 of the node
        assert abs(c.hidden_shift - round(c.hidden_shift)) <= 1 / 128
    data_exact = Dataset([type(data.curves[0])(f.coeffs)], 2)
    assert np.array_equal(data_exact.Y[0], f.coeffs)


def test_dataset_is_deterministic_and_nested():
    f = FourierSeries.from_dict({1: 1.0, 2: 0.3})
    a = generate_dataset(f, smooth_g(), 20, 3, 42)
    b = generate_dataset(f, smooth_g(), 20, 3, 42)
    assert np.array_equal(a.Y, b.Y)
    c = generate_dataset(f, smooth_g(), 8, 3, 42)
    assert np.array_equal(a.Y[:8], c.Y)
    back = Dataset.from_json(a.to_json())
    assert np.array_equal(back.Y, a.Y) and back.truth[0] == f


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        generate_dataset(FourierSeries.from_dict({3: 1.0}), smooth_g(), 1, 2, 0)


# -------------------------------------------------------------- likelihood

def test_k0_likelihood_ignores_g():
    y = np.array([0.3 - 0.2j])
    f = FourierSeries.from_dict({0: 1.0 + 0.5j})
    exact = -abs(y[0] - f[0]) ** 2 - np.log(np.pi)
    for g in (ShiftDensity.uniform(64), smooth_g(64), ShiftDensity.delta(64, 5)):
        assert loglik_curve(y, f, g) == pytest.approx(exact, abs=1e-12)


def test_delta_g_gives_single_gaussian():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    f = FourierSeries(rng.standard_normal(5) + 1j * rng.standard_normal(5))
    exact = float(np.sum(-np.abs(y - f.coeffs) ** 2 - np.log(np.pi)))
    assert loglik_curve(y, f, ShiftDensity.delta(128, 0)) == pytest.approx(exact, abs=1e-12)


def brute_force_loglik(y, f, g_fun, N=1_000_000):
    phi = (np.arange(N) + 0.5) / N
    l = f.frequencies
    acc = np.zeros(N)
    for li, th, yl in zip(l, f.coeffs, y):
        acc += -np.abs(yl - th * np.exp(-2j * np.pi * li * phi)) ** 2
    mx = acc.max()
    return mx + np.log(np.mean(np.exp(acc - mx) * g_fun(phi))) - y.size * np.log(np.pi)


def test_loglik_matches_brute_force_riemann_sum():
    rng = np.random.default_rng(9)
    K = 2
    y = rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)
    f = FourierSeries(rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1))
    c = {1: 0.15 - 0.1j, 2: 0.1j}
    g = ShiftDensity.from_fourier(c, 256)
    g_fun = lambda x: 1 + 2 * np.real(sum(v * np.exp(2j * np.pi * k * x) for k, v in c.items()))
    assert loglik_curve(y, f, g) == pytest.approx(brute_force_loglik(y, f, g_fun), abs=1e-6)


def test_loglik_refinement_and_equivariance():
    rng = np.random.default_rng(4)
    K = 3
    y = rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)
    f = FourierSeries(rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1))
    g = smooth_g(256)
    base = loglik_curve(y, f, g)
    assert abs(base - loglik_curve(y, f, g, Q=512)) < 1e-8
    assert abs(base - loglik_curve(y, f, g.refined(2))) < 1e-8
    # rotate y by phi = 5/256 and translate g by the same amount
    phi = 5 / 256
    y_rot = y * np.exp(-2j * np.pi * np.arange(-K, K + 1) * phi)
    assert loglik_curve(y_rot, f, g.translate(5)) == pytest.approx(base, abs=1e-8)


def test_null_frequency_adds_gaussian_term():
    rng = np.random.default_rng(2)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    f = FourierSeries.from_dict({-1: 0.4, 0: 0.2, 1: 1.0})
    g = smooth_g()
    extra = 0.7 - 0.3j
    y2 = np.r_[0.1j, y, extra]
    f2 = f.with_cutoff(2)
    diff = loglik_curve(y2, f2, g) - loglik_curve(y, f, g)
    assert diff == pytest.approx(-abs(extra) ** 2 - abs(0.1j) ** 2 - 2 * np.log(np.pi), abs=1e-12)


def test_quadrature_precondition_and_zero_density():
    y = np.zeros(5, complex)
    with pytest.raises(ValueError):
        loglik_curve(y, FourierSeries.zeros(2), smooth_g(), Q=5)


def test_dataset_loglik_is_sum_of_curves():
    f = FourierSeries.from_dict({0: 0.2, 1: 1.0, 2: 0.3j})
    data = generate_dataset(f, smooth_g(), 7, 2, 3)
    total = sum(loglik_curve(c, f, smooth_g()) for c in data.curves)
    assert loglik_dataset(data, f, smooth_g()) == pytest.approx(total, abs=1e-10)
    assert mixture_log_density(data.Y, f, smooth_g()).shape == (7,)
