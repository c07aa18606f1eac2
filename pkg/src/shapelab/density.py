"""Shift densities on the circle [0, 1) stored on a uniform grid.

Grid node m sits at tau_m = m/M. Node values are used directly by the
periodic trapezoid rule, so the integral of g is the mean of its values.
For sampling, node m is read as the centre of the cell
[tau_m - 1/(2M), tau_m + 1/(2M)) on which g is constant.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import InvalidDensityError

NORMALIZATION_TOL = 1e-10


class ShiftDensity:
    """Probability density on [0, 1) sampled at M equispaced nodes.

    Parameters
    ----------
    values : array of float, length M
        Nonnegative node values with mean 1 (unit integral).
    attempts : int, optional
        Number of rejection attempts used to produce this density, when it
        comes from the restricted prior sampler.
    """

    def __init__(self, values, attempts: int | None = None):
        v = np.array(values, dtype=float).ravel()
        if v.size < 2:
            raise InvalidDensityError("density grid needs at least 2 nodes")
        if not np.all(np.isfinite(v)):
            raise InvalidDensityError("density has non-finite values")
        if np.any(v < 0):
            raise InvalidDensityError(f"density is negative (min {v.min():.3g})")
        if not np.any(v > 0):
            raise InvalidDensityError("density is identically zero")
        if abs(v.mean() - 1.0) > NORMALIZATION_TOL:
            raise InvalidDensityError(f"density integrates to {v.mean():.12g}, not 1")
        v.setflags(write=False)
        self.values = v
        self.attempts = attempts
        self._spectrum = None
        self._seminorm_cache = {}

    # constructors
    @classmethod
    def normalized(cls, values, attempts=None) -> "ShiftDensity":
        v = np.asarray(values, dtype=float)
        return cls(v / v.mean(), attempts=attempts)

    @classmethod
    def uniform(cls, M: int) -> "ShiftDensity":
        return cls(np.ones(M))

    @classmethod
    def delta(cls, M: int, index: int = 0) -> "ShiftDensity":
        """All mass on one grid cell (a point mass at its node for quadrature)."""
        v = np.zeros(M)
        v[index % M] = M
        return cls(v)

    @classmethod
    def delta_at(cls, M: int, tau: float) -> "ShiftDensity":
        """Point mass on the cell containing tau."""
        return cls.delta(M, int(np.floor(tau * M + 0.5)) % M)

    @classmethod
    def from_fourier(cls, table: dict, M: int) -> "ShiftDensity":
        """Density with c_0 = 1 and the given c_k; c_{-k} is set to conj(c_k).

        Only k > 0 entries are read from ``table``.
        """
        spec = np.zeros(M, dtype=complex)
        spec[0] = 1.0
        for k, c in table.items():
            k = int(k)
            if k <= 0:
                continue
            if k >= M // 2:
                raise InvalidDensityError(f"frequency {k} not representable on {M} nodes")
            spec[k] = c
            spec[-k] = np.conj(c)
        v = np.real(np.fft.ifft(spec)) * M
        return cls(v / v.mean())

    # basic properties
    @property
    def M(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    @property
    def K_g(self) -> int:
        return self.M // 2 - 1

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights g_m / M (sum to one)."""
        return self.values / self.M

    def spectrum(self) -> np.ndarray:
        """Full DFT c_k(g) = (1/M) sum_m g_m exp(-i 2 pi k m / M), indexed k mod M."""
        if self._spectrum is None:
            s = np.fft.fft(self.values) / self.M
            s.setflags(write=False)
            self._spectrum = s
        return self._spectrum

    def coef(self, k: int) -> complex:
        """Fourier coefficient c_k(g) for |k| <= K_g."""
        if abs(k) > self.K_g:
            raise ValueError(f"|k|={abs(k)} exceeds K_g={self.K_g}")
        return complex(self.spectrum()[k % self.M])

    def fourier(self) -> dict:
        """Coefficients c_k(g) for |k| <= K_g as a dict."""
        s = self.spectrum()
        return {k: complex(s[k % self.M]) for k in range(-self.K_g, self.K_g + 1)}

    def sobolev_seminorm(self, nu: float) -> float:
        """sqrt(sum_{0<|k|<=K_g} |k|^(2 nu) |c_k|^2)."""
        nu = float(nu)
        if nu not in self._seminorm_cache:
            s = self.spectrum()
            k = np.arange(1, self.K_g + 1)
            p = np.abs(s[k]) ** 2 + np.abs(s[-k]) ** 2
            self._seminorm_cache[nu] = float(np.sqrt(np.sum(k ** (2 * nu) * p)))
        return self._seminorm_cache[nu]

    def l2_distance(self, other: "ShiftDensity") -> float:
        _check_same_grid(self, other)
        return float(np.sqrt(np.mean((self.values - other.values) ** 2)))

    def is_point_mass(self) -> bool:
        return int(np.count_nonzero(self.values)) == 1

    # transformations
    def translate(self, bins: int) -> "ShiftDensity":
        """Circular translation by bins/M (g(tau) -> g(tau - bins/M))."""
        return ShiftDensity(np.roll(self.values, bins))

    def resample(self, M_new: int) -> np.ndarray:
        """Trigonometric interpolant of the node values at M_new >= M nodes.

        The Nyquist coefficient of an even grid is split evenly between
        +M/2 and -M/2 so the interpolant stays real.
        """
        M = self.M
        if M_new < M:
            raise ValueError("resample only refines the grid")
        if M_new == M:
            return self.values.copy()
        s = np.fft.fft(self.values)
        out = np.zeros(M_new, dtype=complex)
        half = (M - 1) // 2
        out[:half + 1] = s[:half + 1]
        out[M_new - half:] = s[M - half:]
        if M % 2 == 0:
            out[M // 2] = 0.5 * s[M // 2]
            out[M_new - M // 2] = 0.5 * s[M // 2]
        return np.real(np.fft.ifft(out)) * (M_new / M)

    def refined(self, factor: int = 2) -> "ShiftDensity":
        v = self.resample(self.M * factor)
        return ShiftDensity.normalized(np.clip(v, 0.0, None))

    # serialization
    def to_json(self) -> dict:
        return {"M": self.M, "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj) -> "ShiftDensity":
        if isinstance(obj, str):
            obj = json.loads(obj)
        v = np.asarray(obj["values"], float)
        if v.size != int(obj["M"]):
            raise InvalidDensityError("values length does not match M")
        return cls(v)

    def __repr__(self):
        return f"ShiftDensity(M={self.M})"


def _check_same_grid(a: ShiftDensity, b: ShiftDensity):
    if a.M != b.M:
        raise ValueError(f"densities live on different grids ({a.M} vs {b.M})")
