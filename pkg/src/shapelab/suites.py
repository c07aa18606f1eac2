"""Random test cases and bound-check suites shared by the CLI and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import ShiftDensity
from .distances import check_shape_tv_bound, check_shift_tv_chain, MixtureLaw, tv_marginal
from .fourier import FourierSeries
from .identifiability import identifiability_quadratic_form


def random_shape(rng, K: int, scale: float = 0.7, identifiable: bool = True) -> FourierSeries:
    """Complex Gaussian coefficients on [-K, K]; theta_1 real positive when identifiable."""
    c = scale * (rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)) / math.sqrt(2)
    if identifiable and K >= 1:
        c[K + 1] = abs(c[K + 1]) + 0.1
    return FourierSeries(c, identifiable=identifiable and K >= 1)


def random_density(rng, M: int = 256, kmax: int = 3, l1: float = 0.8) -> ShiftDensity:
    """Smooth density 1 + sum c_k e^{...} with random c_k, |k| <= kmax, sum |c| <= l1."""
    c = rng.standard_normal(kmax) + 1j * rng.standard_normal(kmax)
    c *= rng.uniform(0.1, 1.0) * l1 / (2 * np.sum(np.abs(c)))
    return ShiftDensity.from_fourier({k + 1: c[k] for k in range(kmax)}, M)


@dataclass(frozen=True)
class BoundRow:
    suite: str
    case: int
    tv: float
    stderr: float
    bound: float
    ok: bool
    extra: tuple = ()


def shape_bound_suite(cases: int = 50, budget: int = 20_000, seed: int = 0, M: int = 256, workers: int = 1) -> list:
    """TV(P_{f,g}, P_{f',g}) <= ||f - f'|| / sqrt 2 on random triples with K <= 3.

    Monte Carlo is forced so the suite exercises the estimator; a case passes
    when tv - 3 stderr <= bound.
    """
    rows = []
    for i in range(cases):
        rng = np.random.default_rng([seed, 1, i])
        K = int(rng.integers(1, 4))
        f = random_shape(rng, K)
        f_alt = f + random_shape(rng, K, scale=float(rng.uniform(0.05, 0.6)), identifiable=False)
        g = random_density(rng, M)
        tv, bound = check_shape_tv_bound(f, f_alt, g, budget, rng, method="monte-carlo", workers=workers)
        rows.append(BoundRow("shape_bound", i, tv.value, tv.stderr, bound, tv.value - 3 * tv.stderr <= bound))
    return rows


def shift_chain_suite(cases: int = 50, budget: int = 20_000, seed: int = 0, M: int = 256, workers: int = 1) -> list:
    """TV <= c W1 <= c TV(g, g') <= pi ||f||_H1 ||g - g'|| / sqrt 2, c = sqrt2 pi ||f||_H1."""
    rows = []
    for i in range(cases):
        rng = np.random.default_rng([seed, 2, i])
        K = int(rng.integers(1, 4))
        f = random_shape(rng, K)
        g, g_alt = random_density(rng, M), random_density(rng, M)
        tv, w1b, tvb, l2b = check_shift_tv_chain(f, g, g_alt, budget, rng, method="monte-carlo", workers=workers)
        ok = (tv.value - 3 * tv.stderr <= w1b) and w1b <= tvb * (1 + 1e-12) and tvb <= l2b * (1 + 1e-12)
        rows.append(BoundRow("shift_chain", i, tv.value, tv.stderr, w1b, ok, (tvb, l2b)))
    return rows


def identifiability_suite(cases: int = 50, seed: int = 0, N: int = 8, M: int = 256,
                          n_angular: int = 1024) -> list:
    """Quadratic-form lower bound against the measured first-coefficient marginal TV."""
    rows = []
    for i in range(cases):
        rng = np.random.default_rng([seed, 3, i])
        theta1 = float(rng.uniform(0.3, 2.5))
        g, g_alt = random_density(rng, M), random_density(rng, M)
        lower = identifiability_quadratic_form(theta1, g, g_alt, N)
        f = FourierSeries.from_dict({1: theta1})
        tv = tv_marginal(1, MixtureLaw(f, g), MixtureLaw(f, g_alt), n_angular=n_angular,
                         refinement_check=False).value
        rows.append(BoundRow("quadratic_form", i, tv, 0.0, lower, lower <= tv, (theta1,)))
    return rows
