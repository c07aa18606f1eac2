"""Metropolis-within-Gibbs sampler for (f, g) given shifted-curve data.

Moves per sweep:
  * random-walk Metropolis on each active shape coefficient,
  * one birth/death proposal on the sieve level,
  * one preconditioned Crank-Nicolson step on the GP coordinates of g.

The likelihood is cached as the (n, Q) matrix S of linear terms
2 Re(conj(y_jl) theta_l e^{-i 2 pi l phi_q}); a shape move updates S by a
rank-one term and a g move only needs the row sums of exp(S) against the
new quadrature weights.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .density import ShiftDensity
from .distances import MixtureLaw, hellinger_joint
from .errors import ChainDivergenceError, PriorTruncationError
from .fourier import FourierSeries
from .model import LOG_PI, Dataset, _quadrature_weights, default_quadrature_size, loglik_dataset
from .prior import (SievePriorConfig, gp_from_coordinates, k_nu,
                    log_coefficient_prior, normalize_to_density, sample_band_coefficients)

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class ChainConfig:
    iters: int = 20_000
    burn_in: int | None = None       # default 25% of iters
    thin: int = 5
    beta_pcn: float = 0.2
    f_scale: float = 0.05
    nu: float = 1.6
    A: float = 2.0
    M: int = 256
    N_kl: int = 256
    rho: float = 1.5
    c_lambda: float = 1.0
    K_max: int = 32
    prior_n: float | None = None     # defaults to the dataset size
    Q: int | None = None
    adapt: bool = True
    debug: bool = False
    hellinger_budget: int = 1000
    hellinger_seed: int = 20240601
    hellinger_every: int = 1
    max_init_attempts: int = 1000
    allow_empty: bool = False

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.burn_in is not None and not (0 <= self.burn_in < self.iters):
            raise ValueError("need 0 <= burn_in < iters")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not (0 < self.beta_pcn <= 1):
            raise ValueError("beta_pcn must lie in (0, 1]")
        if self.f_scale < 0:
            raise ValueError("f_scale must be >= 0")
        if self.A <= 0:
            raise ValueError("A must be positive")

    @property
    def burn(self) -> int:
        return self.iters // 4 if self.burn_in is None else self.burn_in


@dataclass
class MoveStats:
    proposed: int = 0
    accepted: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


@dataclass
class ChainState:
    level: int
    theta: np.ndarray            # band [-K, K] of the data
    u: np.ndarray                # GP coordinates (bridge xi, then Z)
    w: np.ndarray                # GP values on the grid
    g: ShiftDensity
    log_prior_f: float
    log_prior_u: float
    loglik: float
    S: np.ndarray                # (n, Q) linear likelihood terms
    logw: np.ndarray
    P: np.ndarray | None = None  # exp(S - rowmax), used by g moves
    rowmax: np.ndarray | None = None
    sweep: int = 0
    stats: dict = field(default_factory=lambda: {"f": MoveStats(), "level": MoveStats(), "g": MoveStats()})

    @property
    def log_post(self) -> float:
        return self.log_prior_f + self.log_prior_u + self.loglik

    @property
    def K(self) -> int:
        return (self.theta.size - 1) // 2

    @property
    def f(self) -> FourierSeries:
        return FourierSeries(self.theta, identifiable=True)

    def dump(self) -> dict:
        return {"sweep": self.sweep, "level": self.level, "theta_re": self.theta.real.tolist(),
                "theta_im": self.theta.imag.tolist(), "loglik": self.loglik,
                "log_prior_f": self.log_prior_f, "log_prior_u": self.log_prior_u}


class Sampler:
    """Holds the data-dependent constants of one posterior."""

    def __init__(self, data: Dataset, cfg: ChainConfig):
        if data.n == 0 and not cfg.allow_empty:
            raise ValueError("dataset is empty; set allow_empty=True for prior-only runs")
        self.data = data
        self.cfg = cfg
        self.K = data.K
        self.Y = data.Y
        n_prior = cfg.prior_n if cfg.prior_n is not None else data.n
        self.prior = SievePriorConfig(n_prior, cfg.rho, cfg.c_lambda, cfg.K_max)
        self.K_cap = min(cfg.K_max, max(self.K, 1))
        self.level_logp = self.prior.level_log_weights(self.K_cap)
        self.xi2 = self.prior.xi2
        self.Q = cfg.Q if cfg.Q is not None else default_quadrature_size(self.K)
        self.Qe = max(self.Q, cfg.M)
        self.nodes = np.arange(self.Qe) / self.Qe
        self.l = np.arange(-self.K, self.K + 1)
        self.kv = k_nu(cfg.nu)
        self.dim_u = cfg.N_kl + self.kv
        # phases e^{-i 2 pi l phi_q}, (2K+1, Qe)
        self.phase = np.exp(-2j * np.pi * np.multiply.outer(self.l, self.nodes))
        self.sum_abs_y2 = float(np.sum(np.abs(self.Y) ** 2))
        self.const = -self.sum_abs_y2 - data.n * self.Y.shape[1] * LOG_PI if data.n else 0.0

    # ---- pieces of the target
    def log_prior_f(self, level: int, theta: np.ndarray) -> float:
        lp = float(self.level_logp[level - 1])
        for k in range(-level, level + 1):
            lp += log_coefficient_prior(k, complex(theta[k + self.K]), self.xi2)
        return lp

    def log_prior_u(self, u) -> float:
        return float(-0.5 * u @ u - 0.5 * u.size * LOG_2PI)

    def linear_terms(self, theta) -> np.ndarray:
        if self.data.n == 0:
            return np.zeros((0, self.Qe))
        active = np.flatnonzero(theta)
        return 2.0 * np.real(np.conj(self.Y[:, active]) @ (theta[active, None] * self.phase[active]))

    def loglik_from(self, S, logw, theta) -> float:
        n = S.shape[0]
        if n == 0:
            return 0.0
        E = S + logw
        mx = E.max(axis=1)
        lse = mx + np.log(np.sum(np.exp(E - mx[:, None]), axis=1))
        return float(np.sum(lse) - n * np.sum(np.abs(theta) ** 2) + self.const)

    def weights(self, g: ShiftDensity):
        _, wq = _quadrature_weights(g, self.Q)
        with np.errstate(divide="ignore"):
            return np.log(wq)

    def gp(self, u):
        return gp_from_coordinates(self.cfg.nu, self.cfg.M, u).values

    def refresh_g_cache(self, st: ChainState):
        if st.S.shape[0] == 0:
            st.P = st.S
            st.rowmax = np.zeros(0)
            return
        st.rowmax = st.S.max(axis=1)
        st.P = np.exp(st.S - st.rowmax[:, None])

    def recompute_log_post(self, st: ChainState) -> float:
        """Full recomputation through the public likelihood, for coherence checks."""
        ll = loglik_dataset(self.data, st.f, st.g, self.Q) if self.data.n else 0.0
        return self.log_prior_f(st.level, st.theta) + self.log_prior_u(st.u) + ll


def init_chain(data: Dataset, cfg: ChainConfig, rng) -> tuple[Sampler, ChainState]:
    """Draw a starting state from the prior (restricted to the band of the data)."""
    rng = np.random.default_rng(rng)
    sm = Sampler(data, cfg)
    p = np.exp(sm.level_logp)
    level = int(rng.choice(p.size, p=p / p.sum())) + 1
    theta = sample_band_coefficients(level, sm.K, sm.xi2, rng)
    for attempt in range(cfg.max_init_attempts):
        u = rng.standard_normal(sm.dim_u)
        w = sm.gp(u)
        g = normalize_to_density(w)
        if g.sobolev_seminorm(cfg.nu) <= 2 * cfg.A:
            break
    else:
        raise PriorTruncationError("no initial g inside the Sobolev ball")
    S = sm.linear_terms(theta)
    logw = sm.weights(g)
    st = ChainState(level, theta, u, w, g, sm.log_prior_f(level, theta), sm.log_prior_u(u),
                    sm.loglik_from(S, logw, theta), S, logw)
    sm.refresh_g_cache(st)
    if not np.isfinite(st.log_post):
        raise ChainDivergenceError("initial log posterior is not finite", st.dump())
    return sm, st


def _accept(rng, log_ratio) -> bool:
    return log_ratio >= 0 or rng.random() < math.exp(log_ratio)


def step_f(sm: Sampler, st: ChainState, scales, rng) -> ChainState:
    """Random-walk sweep over active coefficients, then one birth/death proposal."""
    K = sm.K
    scales = np.broadcast_to(np.asarray(scales, float), (2 * K + 1,))
    nc = sm.data.n
    changed = False
    for k in range(-st.level, st.level + 1):
        sc = scales[k + K]
        if sc == 0:
            continue
        i = k + K
        old = complex(st.theta[i])
        if k == 1:
            new = complex(abs(old.real + sc * rng.standard_normal()))
        else:
            new = old + sc * (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
        st.stats["f"].proposed += 1
        theta_new = st.theta.copy()
        theta_new[i] = new
        lp_new = st.log_prior_f - log_coefficient_prior(k, old, sm.xi2) + log_coefficient_prior(k, new, sm.xi2)
        if nc:
            S_new = st.S + 2.0 * np.real(np.conj(sm.Y[:, i])[:, None] * ((new - old) * sm.phase[i])[None, :])
        else:
            S_new = st.S
        ll_new = sm.loglik_from(S_new, st.logw, theta_new)
        if _accept(rng, lp_new + ll_new - st.log_prior_f - st.loglik):
            st.theta, st.S, st.log_prior_f, st.loglik = theta_new, S_new, lp_new, ll_new
            st.stats["f"].accepted += 1
            changed = True
            _debug_check(sm, st, "f")
    changed |= _birth_death(sm, st, rng)
    if changed:
        sm.refresh_g_cache(st)
    return st


def _birth_death(sm: Sampler, st: ChainState, rng) -> bool:
    st.stats["level"].proposed += 1
    birth = rng.random() < 0.5
    K = sm.K
    if birth:
        if st.level >= sm.K_cap:
            return False
        new_level = st.level + 1
        theta_new = st.theta.copy()
        sd = math.sqrt(sm.xi2 / 2.0)
        for k in (-new_level, new_level):
            theta_new[k + K] = sd * (rng.standard_normal() + 1j * rng.standard_normal())
    else:
        if st.level <= 1:
            return False
        new_level = st.level - 1
        theta_new = st.theta.copy()
        for k in (-st.level, st.level):
            theta_new[k + K] = 0.0
    log_level_ratio = float(sm.level_logp[new_level - 1] - sm.level_logp[st.level - 1])
    S_new = sm.linear_terms(theta_new)
    ll_new = sm.loglik_from(S_new, st.logw, theta_new)
    if _accept(rng, log_level_ratio + ll_new - st.loglik):
        st.level, st.theta, st.S, st.loglik = new_level, theta_new, S_new, ll_new
        st.log_prior_f = sm.log_prior_f(new_level, theta_new)
        st.stats["level"].accepted += 1
        _debug_check(sm, st, "level")
        return True
    return False


def step_g(sm: Sampler, st: ChainState, beta: float, rng) -> ChainState:
    """pCN on the GP coordinates; leaves the ball-restricted prior invariant."""
    st.stats["g"].proposed += 1
    u_new = math.sqrt(1.0 - beta * beta) * st.u + beta * rng.standard_normal(st.u.size)
    w_new = sm.gp(u_new)
    g_new = normalize_to_density(w_new)
    if g_new.sobolev_seminorm(sm.cfg.nu) > 2 * sm.cfg.A:
        return st
    logw_new = sm.weights(g_new)
    if sm.data.n:
        ll_new = float(np.sum(np.log(st.P @ np.exp(logw_new)) + st.rowmax)
                       - sm.data.n * np.sum(np.abs(st.theta) ** 2) + sm.const)
    else:
        ll_new = 0.0
    if _accept(rng, ll_new - st.loglik):
        st.u, st.w, st.g, st.logw, st.loglik = u_new, w_new, g_new, logw_new, ll_new
        st.log_prior_u = sm.log_prior_u(u_new)
        st.stats["g"].accepted += 1
        _debug_check(sm, st, "g")
    return st


def _debug_check(sm: Sampler, st: ChainState, move: str):
    if not np.isfinite(st.log_post):
        raise ChainDivergenceError(f"log posterior became {st.log_post} after a {move} move", st.dump())
    if sm.cfg.debug:
        ref = sm.recompute_log_post(st)
        err = abs(ref - st.log_post)
        sm.max_cache_error = max(getattr(sm, "max_cache_error", 0.0), err)
        if err > 1e-8 * max(1.0, abs(ref)):
            raise ChainDivergenceError(f"cached log posterior off by {err:.3g} after a {move} move", st.dump())


# ------------------------------------------------------------------ running

@dataclass
class ChainSample:
    sweep: int
    level: int
    theta: np.ndarray
    g: ShiftDensity


@dataclass
class ChainResult:
    seed: int
    samples: list
    stats: dict
    f_scales: np.ndarray
    beta_pcn: float
    max_cache_error: float = 0.0
    summary: "PosteriorSummary | None" = None


def run_chain(data: Dataset, cfg: ChainConfig, seed: int, truth=None) -> ChainResult:
    """Run one chain; returns thinned post-burn-in samples (and a summary when truth is known)."""
    rng = np.random.default_rng(seed)
    sm, st = init_chain(data, cfg, rng)
    K = sm.K
    scales = np.full(2 * K + 1, cfg.f_scale)
    beta = cfg.beta_pcn
    samples = []
    window = {"f": [0, 0], "g": [0, 0]}
    for sweep in range(1, cfg.iters + 1):
        st.sweep = sweep
        f0 = (st.stats["f"].proposed, st.stats["f"].accepted)
        g0 = (st.stats["g"].proposed, st.stats["g"].accepted)
        step_f(sm, st, scales, rng)
        step_g(sm, st, beta, rng)
        if cfg.adapt and sweep <= cfg.burn:
            window["f"][0] += st.stats["f"].proposed - f0[0]
            window["f"][1] += st.stats["f"].accepted - f0[1]
            window["g"][0] += st.stats["g"].proposed - g0[0]
            window["g"][1] += st.stats["g"].accepted - g0[1]
            if sweep % 50 == 0:
                if window["f"][0] and cfg.f_scale > 0:
                    r = window["f"][1] / window["f"][0]
                    scales = scales * math.exp(np.clip(r - 0.3, -0.5, 0.5))
                if window["g"][0]:
                    r = window["g"][1] / window["g"][0]
                    beta = float(np.clip(beta * math.exp(np.clip(r - 0.25, -0.5, 0.5)), 1e-3, 1.0))
                window = {"f": [0, 0], "g": [0, 0]}
        if sweep % 200 == 0:
            # bound drift of the incrementally updated likelihood cache
            st.S = sm.linear_terms(st.theta)
            st.loglik = sm.loglik_from(st.S, st.logw, st.theta)
            sm.refresh_g_cache(st)
        if not np.isfinite(st.log_post):
            raise ChainDivergenceError("log posterior is not finite", st.dump())
        if sweep > cfg.burn and (sweep - cfg.burn) % cfg.thin == 0:
            samples.append(ChainSample(sweep, st.level, st.theta.copy(), st.g))
    res = ChainResult(int(seed), samples, {k: (v.proposed, v.accepted) for k, v in st.stats.items()},
                      scales, beta, getattr(sm, "max_cache_error", 0.0))
    if truth is not None:
        res.summary = summarize(samples, truth, data.n, cfg)
    return res


def run_chains(data: Dataset, cfg: ChainConfig, seeds, truth=None, workers: int = 1) -> list:
    """Independent chains; results ordered by seed regardless of worker count."""
    seeds = sorted(int(s) for s in seeds)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(lambda s: run_chain(data, cfg, s, truth), seeds))
    else:
        out = [run_chain(data, cfg, s, truth) for s in seeds]
    return out


# ------------------------------------------------------------------ summaries

def contraction_exponent(s: float, nu: float) -> float:
    return min(nu / (2 * nu + 1), s / (2 * s + 2), 3.0 / 8.0)


def epsilon_n(n: float, s: float, nu: float, kappa: float = 0.0) -> float:
    return n ** -contraction_exponent(s, nu) * math.log(n) ** kappa


def log_radius(n: float, nu: float) -> float:
    """(log n)^(-nu): radius for ||g - g0|| (its square is (log n)^(-2 nu))."""
    return math.log(n) ** -nu


def effective_sample_size(x) -> float:
    """Geyer initial positive sequence estimate."""
    x = np.asarray(x, float)
    n = x.size
    if n < 4 or np.var(x) == 0:
        return float(n)
    xc = x - x.mean()
    f = np.fft.rfft(xc, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    s = 0.0
    for m in range(0, n // 2 - 1):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        s += pair
    tau = max(2 * s - 1, 1e-12)
    return float(min(n, n / tau))


def median_stderr(x, batches: int = 20) -> float:
    """Batch-means standard error of the median."""
    x = np.asarray(x, float)
    b = min(batches, x.size // 5)
    if b < 2:
        return float("nan")
    meds = [np.median(part) for part in np.array_split(x, b)]
    return float(np.std(meds, ddof=1) / math.sqrt(b))


@dataclass
class PosteriorSummary:
    n: int
    distances: dict          # name -> array per sample
    medians: dict
    median_se: dict
    ess: dict
    radii: dict              # name -> base radius
    multipliers: list
    mass_curves: dict        # name -> list of masses at multipliers * radius

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "medians": self.medians,
            "median_stderr": self.median_se,
            "ess": self.ess,
            "radii": self.radii,
            "multipliers": self.multipliers,
            "mass_within_radius": self.mass_curves,
        }


RADIUS_MULTIPLIERS = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]


def sample_distances(samples, truth, cfg: ChainConfig) -> dict:
    f0, g0 = truth
    K = samples[0].theta.size // 2 if samples else 0
    t0 = f0.with_cutoff(K).coeffs
    th1_0 = t0[K + 1].real
    law0 = MixtureLaw(f0.with_cutoff(K), g0)
    d = {"dist_theta1": [], "dist_f": [], "dist_g": [], "hellinger": []}
    last_h = float("nan")
    for i, smp in enumerate(samples):
        d["dist_theta1"].append(abs(smp.theta[K + 1].real - th1_0))
        d["dist_f"].append(float(np.linalg.norm(smp.theta - t0)))
        d["dist_g"].append(smp.g.l2_distance(g0) if smp.g.M == g0.M else float("nan"))
        if i % cfg.hellinger_every == 0:
            last_h = hellinger_joint(MixtureLaw(FourierSeries(smp.theta), smp.g), law0,
                                     budget=cfg.hellinger_budget, rng=cfg.hellinger_seed).value
        d["hellinger"].append(last_h)
    return {k: np.asarray(v) for k, v in d.items()}


def summarize(samples, truth, n: int, cfg: ChainConfig, s: float = 1.0, distances=None) -> PosteriorSummary:
    d = sample_distances(samples, truth, cfg) if distances is None else distances
    eps = epsilon_n(max(n, 2), s, cfg.nu)
    radii = {
        "hellinger": eps,
        "dist_g": log_radius(max(n, 2), cfg.nu),
        "dist_f": log_radius(max(n, 2), cfg.nu),
        "dist_theta1": eps ** (1.0 / 3.0),
    }
    mass = {k: [float(np.mean(d[k] <= m * r)) for m in RADIUS_MULTIPLIERS] for k, r in radii.items()}
    return PosteriorSummary(
        n=n, distances=d,
        medians={k: float(np.median(v)) for k, v in d.items()},
        median_se={k: median_stderr(v) for k, v in d.items()},
        ess={k: effective_sample_size(v) for k, v in d.items()},
        radii=radii, multipliers=list(RADIUS_MULTIPLIERS), mass_curves=mass)


# ---------------------------------------------------------- cut-off diagnostics

def g_cutoff(eps: float, nu: float) -> float:
    """Root k >= 1 of (k + 2 nu) log k = (1/3) log(1/eps)."""
    target = math.log(1.0 / eps) / 3.0
    if target <= 0:
        return 1.0
    hi = 2.0
    while (hi + 2 * nu) * math.log(hi) < target:
        hi *= 2
    return brentq(lambda k: (k + 2 * nu) * math.log(k) - target, 1.0, hi, xtol=1e-14)


def f_cutoff(n: float, s: float, nu: float) -> float:
    return math.log(n) ** (2 * nu / (2 * nu + 2 * s + 1))


def head_tail(diff_spectrum: dict, k_cut: float):
    """Split sum |c_k|^2 into |k| <= k_cut and the rest."""
    head = sum(abs(c) ** 2 for k, c in diff_spectrum.items() if abs(k) <= k_cut)
    tail = sum(abs(c) ** 2 for k, c in diff_spectrum.items() if abs(k) > k_cut)
    return head, tail


def cutoff_diagnostics(samples, truth, n: int, s: float, nu: float, beta: float | None = None,
                       kappa: float = 0.0) -> dict:
    f0, g0 = truth
    eps = epsilon_n(n, s, nu, kappa)
    kg = g_cutoff(eps, nu)
    kf = f_cutoff(n, s, nu)
    out = {
        "n": n, "epsilon_n": eps, "k_n_g": kg, "k_n_f": kf,
        "rate_f_nu_form": math.log(n) ** (-2 * s * 2 * nu / (2 * s + 2 * nu + 1)),
        "rate_f_beta_form": (math.log(n) ** (-4 * s * nu / (2 * s + 2 * beta + 1)) if beta is not None else None),
        "note": "the shape rate has a nu form and a beta form; both are reported",
    }
    gh, gt, fh, ft = [], [], [], []
    for smp in samples:
        if smp.g.M == g0.M:
            diff = smp.g.spectrum() - g0.spectrum()
            K_g = g0.K_g
            spec = {k: diff[k % g0.M] for k in range(-K_g, K_g + 1)}
            h, t = head_tail(spec, kg)
            gh.append(h)
            gt.append(t)
        K = smp.theta.size // 2
        fd = smp.theta - f0.with_cutoff(K).coeffs
        h, t = head_tail({k: fd[k + K] for k in range(-K, K + 1)}, kf)
        fh.append(h)
        ft.append(t)
    out.update({
        "g_head_mean": float(np.mean(gh)) if gh else None,
        "g_tail_mean": float(np.mean(gt)) if gt else None,
        "f_head_mean": float(np.mean(fh)) if fh else None,
        "f_tail_mean": float(np.mean(ft)) if ft else None,
    })
    return out
