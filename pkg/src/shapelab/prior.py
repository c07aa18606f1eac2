"""Priors on the shape (frequency sieve) and on the shift density (log-GP).

Shape prior: draw a level l with weight proportional to
exp(-c l^2 log^rho(l+1)) on [1, K_max], then Gaussian coefficients of
variance xi_n^2 on the band [-l, l]; theta_1 is a half-normal so the drawn
shape is already in the identifiable class.

Shift prior: w = J^k(B) + sum_{i<=k} Z_i psi_i with B a Brownian bridge,
J the centred integration operator, psi_i(t) = sin(2 pi i t) + cos(2 pi i t)
and k = floor(nu - 1/2). The density is exp(w)/int exp(w), restricted by
rejection to a Sobolev-nu ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .density import ShiftDensity
from .errors import PriorTruncationError
from .fourier import FourierSeries


# ---------------------------------------------------------------- sieve prior

@dataclass(frozen=True)
class SievePriorConfig:
    n: float
    rho: float = 1.5
    c_lambda: float = 1.0
    K_max: int = 32

    def __post_init__(self):
        if not (1.0 < self.rho < 2.0):
            raise ValueError("rho must lie in (1, 2)")
        if self.n <= 1:
            raise ValueError("n must exceed 1 so that log n > 0")
        if self.K_max < 1:
            raise ValueError("K_max must be >= 1")
        if self.c_lambda <= 0:
            raise ValueError("c_lambda must be positive")

    @property
    def xi2(self) -> float:
        """Coefficient variance n^(-1/4) (log n)^(-3/2)."""
        return self.n ** -0.25 * math.log(self.n) ** -1.5

    def level_log_weights(self, K_cap: int | None = None) -> np.ndarray:
        """Normalized log-probabilities of levels 1..K_cap (K_cap <= K_max)."""
        top = self.K_max if K_cap is None else min(self.K_max, K_cap)
        l = np.arange(1, top + 1, dtype=float)
        lw = -self.c_lambda * l ** 2 * np.log(l + 1.0) ** self.rho
        lw -= lw.max()
        return lw - np.log(np.sum(np.exp(lw)))

    def level_probabilities(self, K_cap: int | None = None) -> np.ndarray:
        return np.exp(self.level_log_weights(K_cap))


def sample_sieve_level(cfg: SievePriorConfig, rng) -> int:
    rng = np.random.default_rng(rng)
    p = cfg.level_probabilities()
    return int(rng.choice(p.size, p=p)) + 1


def sample_band_coefficients(level: int, K: int, xi2: float, rng) -> np.ndarray:
    """Coefficient vector on [-K, K] for a given active level."""
    c = np.zeros(2 * K + 1, dtype=complex)
    sd = math.sqrt(xi2 / 2.0)
    for k in range(-level, level + 1):
        if k == 1:
            c[k + K] = abs(rng.standard_normal()) * math.sqrt(xi2)
        else:
            c[k + K] = sd * (rng.standard_normal() + 1j * rng.standard_normal())
    return c


def sample_sieve_f(cfg: SievePriorConfig, rng, return_level=False):
    """Draw a shape from the sieve prior on the band [-K_max, K_max]."""
    rng = np.random.default_rng(rng)
    level = sample_sieve_level(cfg, rng)
    f = FourierSeries(sample_band_coefficients(level, cfg.K_max, cfg.xi2, rng), identifiable=True)
    return (f, level) if return_level else f


def log_coefficient_prior(k: int, value: complex, xi2: float) -> float:
    """Log density of one active coefficient (half-normal for k = 1)."""
    if k == 1:
        x = value.real
        if x <= 0 or value.imag != 0:
            return -np.inf
        return math.log(2.0) - 0.5 * math.log(2 * math.pi * xi2) - x * x / (2 * xi2)
    return -math.log(math.pi * xi2) - abs(value) ** 2 / xi2


# ------------------------------------------------------------------ J operator

def apply_J(values) -> np.ndarray:
    """Centred integration t -> int_0^t f - t int_0^1 f on the closed grid t_m = m/(M-1).

    Cumulative integrals come from the antiderivative of the periodic-free
    cubic spline through the samples.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("grid needs at least 2 points")
    t = np.linspace(0.0, 1.0, v.size)
    if v.size < 4:
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    else:
        cum = CubicSpline(t, v).antiderivative()(t)
        cum[0] = 0.0
    return cum - t * cum[-1]


def k_nu(nu: float) -> int:
    """Number of integrations: largest integer below nu - 1/2 (floor)."""
    if nu < 0.5:
        raise ValueError("nu must be >= 1/2")
    return int(math.floor(nu - 0.5))


def _j_on_sine_modes(N: int, times: int):
    """Apply J `times` times to sin(pi k t), k = 1..N, exactly.

    Each mode stays in span{sin(pi k t), cos(pi k t), 1, t, ..., t^times}.
    Returns (sin coeff, cos coeff, poly coeffs[N, times+1]).
    """
    k = np.arange(1, N + 1, dtype=float)
    pk = np.pi * k
    a = np.ones(N)
    b = np.zeros(N)
    P = np.zeros((N, times + 2))
    odd = 1.0 - (-1.0) ** k
    for _ in range(times):
        newP = np.zeros_like(P)
        # t^j -> (t^{j+1} - t)/(j+1)
        for j in range(P.shape[1] - 1):
            newP[:, j + 1] += P[:, j] / (j + 1)
            newP[:, 1] -= P[:, j] / (j + 1)
        newP[:, 0] += a / pk
        newP[:, 1] -= a * odd / pk
        a, b = b / pk, -a / pk
        P = newP
    return a, b, P


def _eval_modes(a, b, P, t):
    N = a.size
    k = np.arange(1, N + 1)
    arg = np.pi * np.multiply.outer(t, k)
    out = np.sin(arg) * a + np.cos(arg) * b
    powers = np.power.outer(t, np.arange(P.shape[1]))
    return out + powers @ P.T


@lru_cache(maxsize=32)
def _bridge_basis(times: int, N_kl: int, M: int, closed: bool = False) -> np.ndarray:
    """Matrix mapping standard normal KL coordinates to J^times(B) on the grid."""
    t = np.linspace(0.0, 1.0, M) if closed else np.arange(M) / M
    a, b, P = _j_on_sine_modes(N_kl, times)
    scale = np.sqrt(2.0) / (np.pi * np.arange(1, N_kl + 1))
    B = _eval_modes(a, b, P, t) * scale
    B.setflags(write=False)
    return B


@lru_cache(maxsize=32)
def _psi_basis(kv: int, M: int) -> np.ndarray:
    t = np.arange(M) / M
    i = np.arange(1, kv + 1)
    arg = 2 * np.pi * np.multiply.outer(t, i)
    out = np.sin(arg) + np.cos(arg)
    out.setflags(write=False)
    return out


# --------------------------------------------------------------- GP on shifts

@dataclass(frozen=True, eq=False)
class GpPath:
    """One draw of w on the periodic grid tau_m = m/M.

    ``bridge_coeffs`` are the standard normal coordinates xi_k of the bridge,
    B(t) = sum_k sqrt(2) xi_k sin(pi k t) / (pi k); ``z`` holds Z_1..Z_kv.
    """

    values: np.ndarray
    bridge_coeffs: np.ndarray
    z: np.ndarray
    k_nu: int
    nu: float

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def coordinates(self) -> np.ndarray:
        return np.concatenate([self.bridge_coeffs, self.z])

    def bridge(self, t) -> np.ndarray:
        """Evaluate the bridge B at arbitrary times from its coordinates."""
        t = np.atleast_1d(np.asarray(t, float))
        k = np.arange(1, self.bridge_coeffs.size + 1)
        return np.sin(np.pi * np.multiply.outer(t, k)) @ (np.sqrt(2.0) * self.bridge_coeffs / (np.pi * k))


def gp_from_coordinates(nu: float, M: int, coords) -> GpPath:
    """Assemble w from a vector (xi_1..xi_N, Z_1..Z_kv) of standard normals."""
    kv = k_nu(nu)
    coords = np.asarray(coords, float)
    N = coords.size - kv
    xi, z = coords[:N], coords[N:]
    w = _bridge_basis(kv, N, M) @ xi
    if kv:
        w = w + _psi_basis(kv, M) @ z
    return GpPath(w, xi.copy(), z.copy(), kv, float(nu))


def sample_gp_w(nu: float, M: int = 256, N_kl: int = 512, rng=None) -> GpPath:
    if nu < 0.5:
        raise ValueError("nu must be >= 1/2")
    if M < 64 or N_kl < 16:
        raise ValueError("need M >= 64 and N_kl >= 16")
    rng = np.random.default_rng(rng)
    return gp_from_coordinates(nu, M, rng.standard_normal(N_kl + k_nu(nu)))


def normalize_to_density(w) -> ShiftDensity:
    """exp(w) / int exp(w) on the grid, computed after subtracting max(w)."""
    v = w.values if isinstance(w, GpPath) else np.asarray(w, float)
    if not np.all(np.isfinite(v)):
        raise ValueError("w must be finite")
    e = np.exp(v - v.max())
    return ShiftDensity(e / e.mean())


def sample_restricted_gp(nu: float, A: float, M: int = 256, N_kl: int = 512,
                         max_attempts: int = 1000, rng=None):
    """Rejection-sample (w, density, attempts) with Sobolev-nu seminorm <= 2A."""
    if A <= 0:
        raise ValueError("A must be positive")
    rng = np.random.default_rng(rng)
    for attempt in range(1, max_attempts + 1):
        w = sample_gp_w(nu, M, N_kl, rng)
        g = normalize_to_density(w)
        if g.sobolev_seminorm(nu) <= 2 * A:
            g.attempts = attempt
            return w, g, attempt
    raise PriorTruncationError(
        f"no draw inside the Sobolev ball of radius {2 * A} after {max_attempts} attempts")


def sample_g_prior(nu: float, A: float, M: int = 256, N_kl: int = 512,
                   max_attempts: int = 1000, rng=None) -> ShiftDensity:
    return sample_restricted_gp(nu, A, M, N_kl, max_attempts, rng)[1]


# ------------------------------------------------------------------ small ball

@dataclass(frozen=True)
class SmallBallEstimate:
    k: int
    epsilon: float
    reps: int
    estimate: float
    stderr: float
    censored: bool
    upper_bound: float  # one-sided 95% bound, meaningful when censored


def integrated_bridge_sup(k: int, reps: int, N_kl: int = 512, M: int = 256, rng=None,
                          chunk: int = 2000) -> np.ndarray:
    """sup over the grid of |J^k(B)| for `reps` independent bridges."""
    rng = np.random.default_rng(rng)
    basis = _bridge_basis(k, N_kl, M)
    out = np.empty(reps)
    for s in range(0, reps, chunk):
        m = min(chunk, reps - s)
        xi = rng.standard_normal((m, N_kl))
        out[s:s + m] = np.abs(xi @ basis.T).max(axis=1)
    return out


def bridge_survival(eps, reps: int, M: int = 256, rng=None, chunk: int = 2000) -> np.ndarray:
    """Per-replicate P(sup |B| <= eps | grid values) for a Brownian bridge.

    Grid values are sampled exactly (random walk pinned at 1) and each cell
    contributes the closed-form probability that the bridge between its two
    endpoints stays inside the band, so the continuous sup is not
    understated by the grid. Returns an array of shape (len(eps), reps).
    """
    rng = np.random.default_rng(rng)
    eps = np.atleast_1d(np.asarray(eps, float))
    dt = 1.0 / M
    t = np.arange(M + 1) * dt
    out = np.empty((eps.size, reps))
    for s in range(0, reps, chunk):
        m = min(chunk, reps - s)
        walk = np.zeros((m, M + 1))
        walk[:, 1:] = np.cumsum(rng.standard_normal((m, M)) * math.sqrt(dt), axis=1)
        b = walk - t * walk[:, -1:]
        lo, hi = b[:, :-1], b[:, 1:]
        for i, e in enumerate(eps):
            inside = np.all(np.abs(b) < e, axis=1)
            # one-sided crossing probabilities; the double-crossing term is below exp(-8 e^2 / dt)
            up = np.exp(-2.0 * (e - lo) * (e - hi) / dt)
            down = np.exp(-2.0 * (e + lo) * (e + hi) / dt)
            stay = np.clip(1.0 - up - down, 1e-300, 1.0)
            logp = np.sum(np.log(stay), axis=1)
            out[i, s:s + m] = np.where(inside, np.exp(logp), 0.0)
    return out


def smallball_curve(k: int, eps, reps: int = 100_000, N_kl: int = 512, M: int = 256,
                    rng=None) -> list:
    """Estimates of P(sup |J^k(B)| <= eps) for several eps from shared replicates.

    For k = 0 the bridge itself is rough and a grid maximum misses its peaks,
    so the estimate averages the exact in-cell survival probabilities
    (bridge_survival). Integrated paths are C^1 and the grid sup is used directly.
    A point is censored when no replicate lands inside the ball.
    """
    if reps < 100:
        raise ValueError("reps must be >= 100")
    eps = np.atleast_1d(np.asarray(eps, float))
    if k == 0:
        weights = bridge_survival(eps, reps, M, rng)
    else:
        sups = integrated_bridge_sup(k, reps, N_kl, M, rng)
        weights = (sups[None, :] <= eps[:, None]).astype(float)
    out = []
    for e, wts in zip(eps, weights):
        hits = int(np.count_nonzero(wts))
        p = float(wts.mean())
        se = float(wts.std(ddof=1) / math.sqrt(reps)) if hits else 0.0
        out.append(SmallBallEstimate(k, float(e), reps, p, se, hits == 0, 3.0 / reps if hits == 0 else p))
    return out


def smallball_probability(k: int, eps: float, reps: int = 100_000, N_kl: int = 512,
                          M: int = 256, rng=None):
    """(estimate, stderr) of P(sup |J^k(B)| <= eps); see smallball_curve for censoring."""
    est = smallball_curve(k, [eps], reps, N_kl, M, rng)[0]
    return est.estimate, est.stderr


def hellinger_log_density_bound_check(v, w):
    """(lhs, rhs): Hellinger distance of the normalized exponentials and its sup-norm bound."""
    a = v.values if isinstance(v, GpPath) else np.asarray(v, float)
    b = w.values if isinstance(w, GpPath) else np.asarray(w, float)
    if a.shape != b.shape:
        raise ValueError("paths must share a grid")
    p, q = normalize_to_density(a).values, normalize_to_density(b).values
    lhs = math.sqrt(float(np.mean((np.sqrt(p) - np.sqrt(q)) ** 2)))
    d = float(np.max(np.abs(a - b)))
    return lhs, d * math.exp(d / 2.0)


def smallball_slope(estimates, weighted: bool = True) -> tuple:
    """Least-squares slope of log(-log P) against log(1/eps).

    Censored points and P in {0, 1} are left out. With ``weighted`` each
    point gets weight 1/var from the delta method, var = (se / (P log P))^2,
    so eps values resting on a handful of hits do not dominate.
    Returns (slope, intercept, n_points).
    """
    xs, ys, ws = [], [], []
    for e in estimates:
        if e.censored or not (0 < e.estimate < 1):
            continue
        xs.append(math.log(1.0 / e.epsilon))
        ys.append(math.log(-math.log(e.estimate)))
        sd = e.stderr / abs(e.estimate * math.log(e.estimate))
        ws.append(1.0 / sd if (weighted and sd > 0) else 1.0)
    if len(xs) < 2:
        return float("nan"), float("nan"), len(xs)
    slope, intercept = np.polyfit(xs, ys, 1, w=ws)
    return float(slope), float(intercept), len(xs)
