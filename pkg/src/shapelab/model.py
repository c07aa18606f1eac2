"""Randomly shifted curves observed through noisy Fourier coefficients.

Curve j is observed as

    y_l = theta_l exp(-i 2 pi l tau_j) + xi_l,   l = -K..K,

with tau_j ~ g and xi_l standard complex Gaussian (real and imaginary parts
independent N(0, 1/2), density exp(-|z|^2)/pi).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .density import ShiftDensity
from .errors import InvalidDensityError, TruncationWarning
from .fourier import FourierSeries

LOG_PI = float(np.log(np.pi))


@dataclass(frozen=True, eq=False)
class CurveObservation:
    y: np.ndarray
    hidden_shift: float | None = None
    noise_level: float = 1.0

    def __post_init__(self):
        y = np.array(self.y, dtype=complex).ravel()
        if y.size % 2 != 1:
            raise ValueError("observation must have odd length 2K+1")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def K(self) -> int:
        return (self.y.size - 1) // 2


@dataclass(eq=False)
class Dataset:
    curves: list
    K: int
    seed: int | None = None
    sigma: float = 1.0
    truth: tuple | None = None  # (FourierSeries, ShiftDensity)
    _Y: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for c in self.curves:
            if c.K != self.K:
                raise ValueError("all curves must share the cutoff K")

    @property
    def n(self) -> int:
        return len(self.curves)

    @property
    def Y(self) -> np.ndarray:
        """Observations stacked as an (n, 2K+1) complex matrix."""
        if self._Y is None:
            if self.curves:
                self._Y = np.vstack([c.y for c in self.curves])
            else:
                self._Y = np.zeros((0, 2 * self.K + 1), dtype=complex)
        return self._Y

    def subset(self, n: int) -> "Dataset":
        """First n curves (datasets drawn with the same seed are nested)."""
        return Dataset(self.curves[:n], self.K, self.seed, self.sigma, self.truth)

    def to_json(self) -> dict:
        out = {
            "K": self.K,
            "sigma": self.sigma,
            "seed": self.seed,
            "curves": [],
        }
        for c in self.curves:
            item = {"re": c.y.real.tolist(), "im": c.y.imag.tolist()}
            if c.hidden_shift is not None:
                item["shift"] = c.hidden_shift
            out["curves"].append(item)
        if self.truth is not None:
            f0, g0 = self.truth
            out["truth"] = {"f": f0.to_json(), "g": g0.to_json()}
        return out

    @classmethod
    def from_json(cls, obj) -> "Dataset":
        if isinstance(obj, str):
            obj = json.loads(obj)
        sigma = float(obj.get("sigma", 1.0))
        curves = [
            CurveObservation(np.asarray(c["re"]) + 1j * np.asarray(c["im"]), c.get("shift"), sigma)
            for c in obj["curves"]
        ]
        truth = None
        if obj.get("truth") is not None:
            f0 = FourierSeries.from_json(obj["truth"]["f"])
            if f0[1].imag == 0 and f0[1].real > 0:
                f0 = FourierSeries(f0.coeffs, identifiable=True)
            truth = (f0, ShiftDensity.from_json(obj["truth"]["g"]))
        return cls(curves, int(obj["K"]), obj.get("seed"), sigma, truth)


def sample_shift(g: ShiftDensity, rng, size=None, jitter: bool = True):
    """Draw shifts from g by inverse CDF over cells plus uniform jitter in the cell.

    Cell m is centred on node m/M, so draws stay consistent with the node
    quadrature used by the likelihood. With ``jitter=False`` the draw is the
    node itself, i.e. a sample of the discrete measure used by quadrature.
    """
    if not isinstance(g, ShiftDensity) or abs(g.values.mean() - 1.0) > 1e-10:
        raise InvalidDensityError("sample_shift needs a normalized ShiftDensity")
    rng = np.random.default_rng(rng)
    cdf = np.cumsum(g.values)
    cdf /= cdf[-1]
    n = 1 if size is None else int(np.prod(size))
    u = rng.random(n)
    offset = rng.random(n) - 0.5 if jitter else np.zeros(n)
    m = np.minimum(np.searchsorted(cdf, u, side="right"), g.M - 1)
    tau = np.mod((m + offset) / g.M, 1.0)
    tau[tau >= 1.0] = 0.0
    if size is None:
        return float(tau[0])
    return tau.reshape(size)


def complex_normal(rng, shape, scale=1.0):
    """Standard complex Gaussian: E|xi|^2 = scale^2, independent real/imag parts."""
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_dataset(f0: FourierSeries, g0: ShiftDensity, n: int, K: int, seed: int,
                     sigma: float = 1.0) -> Dataset:
    """Simulate n curves. Curve j uses the RNG stream (seed, j), so prefixes nest."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if np.any(np.abs(f0.support()) > K):
        warnings.warn(f"cutoff K={K} drops coefficients of the shape beyond it", TruncationWarning)
    theta = f0.with_cutoff(K)
    l = theta.frequencies
    curves = []
    for j in range(n):
        rng = np.random.default_rng([int(seed), j])
        tau = sample_shift(g0, rng)
        noise = complex_normal(rng, l.size, sigma)
        y = theta.coeffs * np.exp(-2j * np.pi * l * tau) + noise
        curves.append(CurveObservation(y, tau, sigma))
    return Dataset(curves, K, int(seed), sigma, (f0, g0))


def default_quadrature_size(K: int) -> int:
    return max(256, 8 * K)


def _quadrature_weights(g: ShiftDensity, Q: int):
    """Nodes and weights for integrating against g with at least Q nodes.

    Point masses are integrated exactly at their atom. Otherwise the node
    count is max(Q, M) and g is carried there by trigonometric interpolation.
    """
    if g.is_point_mass():
        m = int(np.flatnonzero(g.values)[0])
        return np.array([m / g.M]), np.array([1.0])
    Qe = max(Q, g.M)
    vals = np.clip(g.resample(Qe), 0.0, None)
    return np.arange(Qe) / Qe, vals / vals.sum()


def mixture_log_density(Z, theta: FourierSeries, g: ShiftDensity, Q: int | None = None,
                        chunk: int = 4096) -> np.ndarray:
    """log of int prod_l gamma(z_l - theta_l e^{-i 2 pi l phi}) g(phi) dphi, row-wise.

    Parameters
    ----------
    Z : (N, 2K+1) complex array
        Points in C^(2K+1), frequencies ordered -K..K.
    theta : FourierSeries
        Shape; aligned to the band of Z.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    K = (Z.shape[1] - 1) // 2
    if Q is None:
        Q = default_quadrature_size(K)
    if Q < 2 * K + 2:
        raise ValueError(f"quadrature size {Q} below 2K+2={2 * K + 2}")
    th = theta.with_cutoff(K).coeffs
    l = np.arange(-K, K + 1)
    active = np.flatnonzero(th)
    nodes, w = _quadrature_weights(g, Q)
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    phase = np.exp(-2j * np.pi * np.multiply.outer(l[active], nodes)) * th[active, None]
    const = -np.sum(np.abs(th) ** 2) - Z.shape[1] * LOG_PI
    out = np.empty(Z.shape[0])
    for s in range(0, Z.shape[0], chunk):
        z = Z[s:s + chunk]
        E = 2.0 * np.real(np.conj(z[:, active]) @ phase) + logw
        mx = E.max(axis=1)
        lse = mx + np.log(np.sum(np.exp(E - mx[:, None]), axis=1))
        out[s:s + chunk] = lse - np.sum(np.abs(z) ** 2, axis=1) + const
    return out


def loglik_curve(y, f: FourierSeries, g: ShiftDensity, Q: int | None = None) -> float:
    """Exact mixture log-likelihood of one observed curve.

    Trapezoid rule on the circle with log-sum-exp stabilization; default
    Q = max(256, 8K).
    """
    if isinstance(y, CurveObservation):
        y = y.y
    if not np.any(g.values > 0):
        raise InvalidDensityError("density is identically zero")
    return float(mixture_log_density(np.asarray(y)[None, :], f, g, Q)[0])


def loglik_dataset(data: Dataset, f: FourierSeries, g: ShiftDensity, Q: int | None = None) -> float:
    if data.n == 0:
        return 0.0
    return float(np.sum(mixture_log_density(data.Y, f, g, Q)))


def sample_mixture(theta: FourierSeries, g: ShiftDensity, size: int, rng, K: int | None = None):
    """Draw points of the law P_{theta,g} on the band [-K, K].

    Shifts come from the discrete node measure of g, the same measure the
    likelihood quadrature integrates against.
    """
    rng = np.random.default_rng(rng)
    K = theta.K if K is None else K
    th = theta.with_cutoff(K)
    tau = sample_shift(g, rng, size=size, jitter=False)
    mean = th.coeffs[None, :] * np.exp(-2j * np.pi * np.multiply.outer(tau, th.frequencies))
    return mean + complex_normal(rng, mean.shape)
