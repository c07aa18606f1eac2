"""Truncated complex Fourier series on [0, 1) and the shift action on them.

A shape is stored as its coefficients theta_l for l = -K..K, so that

    f(x) = sum_l theta_l exp(i 2 pi l x).

Translating f by phi (x -> f(x - phi)) multiplies theta_l by exp(-i 2 pi l phi).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AliasingError


@dataclass(frozen=True, eq=False)
class FourierSeries:
    """Coefficients on the symmetric band [-K, K].

    Parameters
    ----------
    coeffs : array of complex, length 2K+1
        Entry ``coeffs[l + K]`` holds theta_l.
    identifiable : bool
        When set, theta_1 must be real and strictly positive. This is the
        normalization that removes the shift ambiguity of the model.
    """

    coeffs: np.ndarray
    identifiable: bool = False
    K: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise ValueError("coefficient vector must have odd length 2K+1")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "K", (c.size - 1) // 2)
        if self.identifiable:
            t1 = self[1]
            if not (t1.imag == 0.0 and t1.real > 0.0):
                raise ValueError(f"identifiable series needs real positive theta_1, got {t1}")

    @classmethod
    def zeros(cls, K: int) -> "FourierSeries":
        return cls(np.zeros(2 * K + 1, dtype=complex))

    @classmethod
    def from_dict(cls, table: dict, K: int | None = None, identifiable=False) -> "FourierSeries":
        """Build from a sparse ``{frequency: coefficient}`` table."""
        if K is None:
            K = max((abs(int(l)) for l in table), default=0)
        c = np.zeros(2 * K + 1, dtype=complex)
        for l, v in table.items():
            l = int(l)
            if abs(l) > K:
                raise ValueError(f"frequency {l} outside band [-{K}, {K}]")
            c[l + K] = v
        return cls(c, identifiable=identifiable)

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def __getitem__(self, l: int) -> complex:
        if abs(l) > self.K:
            return 0j
        return complex(self.coeffs[l + self.K])

    def support(self) -> np.ndarray:
        """Frequencies carrying a nonzero coefficient."""
        return self.frequencies[self.coeffs != 0]

    def with_cutoff(self, K: int) -> "FourierSeries":
        """Zero-pad or truncate to the band [-K, K]."""
        c = np.zeros(2 * K + 1, dtype=complex)
        m = min(K, self.K)
        c[K - m:K + m + 1] = self.coeffs[self.K - m:self.K + m + 1]
        ident = self.identifiable and K >= 1
        return FourierSeries(c, identifiable=ident)

    def __add__(self, other):
        K = max(self.K, other.K)
        return FourierSeries(self.with_cutoff(K).coeffs + other.with_cutoff(K).coeffs)

    def __sub__(self, other):
        K = max(self.K, other.K)
        return FourierSeries(self.with_cutoff(K).coeffs - other.with_cutoff(K).coeffs)

    def __eq__(self, other):
        if not isinstance(other, FourierSeries):
            return NotImplemented
        K = max(self.K, other.K)
        return bool(np.array_equal(self.with_cutoff(K).coeffs, other.with_cutoff(K).coeffs))

    def __repr__(self):
        nz = {int(l): complex(self[l]) for l in self.support()}
        return f"FourierSeries(K={self.K}, {nz})"

    def to_json(self) -> dict:
        return {"K": self.K, "re": self.coeffs.real.tolist(), "im": self.coeffs.imag.tolist()}

    @classmethod
    def from_json(cls, obj: dict | str, identifiable=False) -> "FourierSeries":
        if isinstance(obj, str):
            obj = json.loads(obj)
        re, im = np.asarray(obj["re"], float), np.asarray(obj["im"], float)
        if re.size != 2 * int(obj["K"]) + 1 or im.size != re.size:
            raise ValueError("re/im length does not match K")
        return cls(re + 1j * im, identifiable=identifiable)


@dataclass(frozen=True)
class NormReport:
    l2: float
    h1: float
    sobolev_s: float
    s: float


def shift_action(theta: FourierSeries, phi: float) -> FourierSeries:
    """Rotate each coefficient: theta_l -> theta_l exp(-i 2 pi l phi)."""
    phase = np.exp(-2j * np.pi * theta.frequencies * phi)
    return FourierSeries(theta.coeffs * phase)


def evaluate_on_grid(f: FourierSeries, M: int) -> np.ndarray:
    """Values of f at x_m = m/M, m = 0..M-1."""
    if M < 2 * f.K + 1:
        raise AliasingError(f"grid of {M} points cannot carry band K={f.K}")
    spec = np.zeros(M, dtype=complex)
    spec[f.frequencies % M] = f.coeffs
    return np.fft.ifft(spec) * M


def coefficients_from_grid(values, K: int) -> FourierSeries:
    """Discrete Fourier analysis of grid samples, keeping |l| <= K."""
    values = np.asarray(values)
    M = values.size
    if M < 2 * K + 1:
        raise AliasingError(f"{M} samples cannot resolve band K={K}")
    spec = np.fft.fft(values) / M
    return FourierSeries(spec[np.arange(-K, K + 1) % M])


def norms(f: FourierSeries, s: float = 1.0) -> NormReport:
    l = f.frequencies.astype(float)
    p = np.abs(f.coeffs) ** 2
    return NormReport(
        l2=float(np.sqrt(p.sum())),
        h1=float(np.sqrt(np.sum(l ** 2 * p))),
        sobolev_s=float(np.sqrt(np.sum((1.0 + np.abs(l) ** (2 * s)) * p))),
        s=s,
    )


def frechet_distance(f1: FourierSeries, f2: FourierSeries, grid: int = 1024) -> float:
    """inf over tau of ||shift_action(f1, tau) - f2||.

    Grid search over tau followed by a bounded scalar refinement around
    the best grid point.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    K = max(f1.K, f2.K)
    a, b = f1.with_cutoff(K).coeffs, f2.with_cutoff(K).coeffs
    l = np.arange(-K, K + 1)
    const = np.sum(np.abs(a) ** 2) + np.sum(np.abs(b) ** 2)
    cross = np.conj(b) * a

    def sq(tau):
        tau = np.asarray(tau, float)
        ph = np.exp(-2j * np.pi * np.multiply.outer(tau, l))
        return const - 2.0 * np.real(ph @ cross)

    taus = np.arange(grid) / grid
    vals = sq(taus)
    i = int(np.argmin(vals))
    best = float(vals[i])
    if grid > 1:
        h = 1.0 / grid
        res = minimize_scalar(lambda t: float(sq(t)), bounds=(taus[i] - h, taus[i] + h),
                              method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return float(np.sqrt(max(best, 0.0)))
