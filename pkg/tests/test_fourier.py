import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapelab.errors import AliasingError
from shapelab.fourier import (FourierSeries, coefficients_from_grid, evaluate_on_grid, frechet_distance,
                              norms, shift_action)


def random_series(seed, K):
    rng = np.random.default_rng(seed)
    return FourierSeries(rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 8), st.floats(0, 1), st.floats(0, 1))
def test_shift_action_preserves_modulus_and_composes(seed, K, p1, p2):
    f = random_series(seed, K)
    g = shift_action(f, p1)
    assert np.allclose(np.abs(g.coeffs), np.abs(f.coeffs), rtol=1e-12, atol=0)
    a = shift_action(shift_action(f, p1), p2)
    b = shift_action(f, (p1 + p2) % 1.0)
    assert np.allclose(a.coeffs, b.coeffs, rtol=0, atol=1e-12 * max(1, np.abs(f.coeffs).max()))
    n0, n1 = norms(f), norms(g)
    assert n1.l2 == pytest.approx(n0.l2, rel=1e-12)
    assert n1.h1 == pytest.approx(n0.h1, rel=1e-12)


def test_shift_action_translates_the_function():
    f = random_series(3, 4)
    phi = 0.237
    x = np.linspace(0, 1, 17)
    direct = lambda c, y: np.sum(c.coeffs * np.exp(2j * np.pi * np.outer(y, c.frequencies)), axis=1)
    assert np.allclose(direct(shift_action(f, phi), x), direct(f, x - phi), atol=1e-12)


def test_evaluate_on_grid_matches_direct_sum():
    f = random_series(7, 5)
    M = 32
    x = np.arange(M) / M
    naive = np.array([sum(f[l] * np.exp(2j * np.pi * l * xm) for l in range(-5, 6)) for xm in x])
    assert np.allclose(evaluate_on_grid(f, M), naive, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 10), st.integers(0, 6))
def test_grid_round_trip(seed, K, extra):
    f = random_series(seed, K)
    M = 2 * K + 1 + extra
    back = coefficients_from_grid(evaluate_on_grid(f, M), K)
    assert np.allclose(back.coeffs, f.coeffs, atol=1e-12)


def test_aliasing_is_rejected():
    with pytest.raises(AliasingError):
        evaluate_on_grid(random_series(0, 5), 10)
    with pytest.raises(AliasingError):
        coefficients_from_grid(np.zeros(6), 3)


def test_norm_values_by_hand():
    f = FourierSeries.from_dict({-2: 1.0, 1: 2.0, 3: 1j})
    r = norms(f, s=2.0)
    assert r.l2 == pytest.approx(np.sqrt(1 + 4 + 1))
    assert r.h1 == pytest.approx(np.sqrt(4 + 4 + 9))
    assert r.sobolev_s == pytest.approx(np.sqrt((1 + 16) + 4 * 2 + (1 + 81)))


def test_frechet_examples():
    f1 = FourierSeries.from_dict({1: 1.0})
    assert frechet_distance(f1, f1) == 0.0
    assert frechet_distance(f1, shift_action(f1, 0.3)) < 1e-6
    f2 = FourierSeries.from_dict({2: 1.0})
    # brute force over a fine shift grid
    taus = np.linspace(0, 1, 20001)
    brute = min(np.linalg.norm(shift_action(f1, t).with_cutoff(2).coeffs - f2.coeffs) for t in taus[::50])
    assert frechet_distance(f1, f2) == pytest.approx(np.sqrt(2), abs=1e-12)
    assert brute == pytest.approx(np.sqrt(2), abs=1e-12)


def test_frechet_recovers_random_shift():
    f = random_series(11, 4)
    g = shift_action(f, 0.61803)
    assert frechet_distance(f, g) < 1e-6


def test_identifiable_class_and_json_round_trip():
    with pytest.raises(ValueError):
        FourierSeries.from_dict({1: 1j}, identifiable=True)
    f = FourierSeries.from_dict({0: 0.5, 1: 2.0, -3: 1 - 1j}, identifiable=True)
    obj = json.loads(json.dumps(f.to_json()))
    assert obj["K"] == 3 and len(obj["re"]) == 7
    assert FourierSeries.from_json(obj) == f
    assert f[10] == 0
