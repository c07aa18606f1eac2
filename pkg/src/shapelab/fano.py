"""Hypothesis nets for minimax lower bounds, and the Fano inequality.

The net has p shapes f_j = e^{i 2 pi x} + p^{-s} e^{i 2 pi (j-1)/p} e^{i 2 pi p x}
paired with shift densities g_j whose Fourier coefficients are phase-rotated
copies of those of g_1 (c_k(g_1) = a |k|^{-beta}). Writing q = m + l p with
|m| <= p/4, c_q(g_j) = exp(-i 2 pi l (j-1)/p) c_q(g_1): every mixed moment
of the frequency-1 and frequency-p coordinates then agrees across the net
up to high order, so the laws are nearly indistinguishable while the f_j
stay separated.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .density import ShiftDensity
from .distances import MixtureLaw, tv_joint
from .errors import InvalidDensityError
from .fourier import FourierSeries

ABLATIONS = ("none", "uniform")


@dataclass(frozen=True, eq=False)
class FanoNet:
    p: int
    s: float
    nu: float
    beta: float
    A: float
    a: float
    M: int
    f_list: list
    g_list: list
    ablation: str = "none"

    @property
    def d(self) -> int:
        return self.p // 4

    def to_json(self) -> dict:
        return {
            "p": self.p, "s": self.s, "nu": self.nu, "beta": self.beta, "A": self.A, "a": self.a,
            "M": self.M, "ablation": self.ablation,
            "f": [f.to_json() for f in self.f_list],
            "g": [g.to_json() for g in self.g_list],
        }


def net_amplitude(beta: float, nu: float, A: float) -> float:
    """Largest a keeping g_1 in the Sobolev ball and its coefficients absolutely summable to <= 1.

    min(A / sqrt(2 zeta(2 beta - 2 nu)), 1 / sqrt(2 zeta(2 beta)), 1 / (2 zeta(beta))).
    The last term is what makes sum_{k != 0} |c_k| <= 1 hold.
    """
    if beta <= nu + 0.5:
        raise ValueError("need beta > nu + 1/2")
    if beta <= 1:
        raise ValueError("need beta > 1 for absolutely summable coefficients")
    return float(min(A / math.sqrt(2 * zeta(2 * beta - 2 * nu)),
                     1 / math.sqrt(2 * zeta(2 * beta)),
                     1 / (2 * zeta(beta))))


def net_shape(j: int, p: int, s: float) -> FourierSeries:
    """f_j with j counted from 1."""
    return FourierSeries.from_dict({1: 1.0, p: p ** -s * np.exp(2j * np.pi * (j - 1) / p)}, K=p,
                                   identifiable=True)


def _phase_index(q: int, p: int) -> int | None:
    """l with q = m + l p and |m| <= p/4, or None when q has no such form."""
    l = int(round(q / p))
    m = q - l * p
    return l if abs(m) <= p // 4 else None


def net_density_spectrum(j: int, p: int, a: float, beta: float, M: int, phase_sign: int = -1) -> np.ndarray:
    K_g = M // 2 - 1
    spec = np.zeros(M, dtype=complex)
    spec[0] = 1.0
    for q in range(1, K_g + 1):
        c = a * q ** -beta
        l = _phase_index(q, p)
        if l is not None:
            c = c * np.exp(phase_sign * 2j * np.pi * l * (j - 1) / p)
        spec[q] = c
        spec[-q] = np.conj(c)
    return spec


def build_net(p: int, s: float, nu: float, beta: float, A: float, M: int = 256,
              ablation: str = "none", phase_sign: int = -1) -> FanoNet:
    """Net of p pairs (f_j, g_j).

    ``ablation='uniform'`` breaks the coefficient links to g_1 by keeping g_1
    and using the uniform density for every j >= 2. ``phase_sign`` selects
    the rotation exp(+-i 2 pi l (j-1)/p) of the linked coefficients (0: none);
    -1 is the one matching the mixture moments under y_l = theta_l e^{-i 2 pi l tau}.
    """
    if phase_sign not in (-1, 0, 1):
        raise ValueError("phase_sign must be -1, 0 or 1")
    if p < 4 or p % 4:
        raise ValueError("p must be a positive multiple of 4")
    if ablation not in ABLATIONS:
        raise ValueError(f"ablation must be one of {ABLATIONS}")
    if M < 2 * p + 2:
        raise ValueError("grid too coarse for frequency p")
    a = net_amplitude(beta, nu, A)
    f_list = [net_shape(j, p, s) for j in range(1, p + 1)]
    g_list = []
    for j in range(1, p + 1):
        if ablation == "uniform" and j > 1:
            g_list.append(ShiftDensity.uniform(M))
            continue
        v = np.real(np.fft.ifft(net_density_spectrum(j, p, a, beta, M, phase_sign))) * M
        if v.min() < -1e-12:
            raise InvalidDensityError(f"g_{j} negative on the grid (min {v.min():.3g})")
        g_list.append(ShiftDensity.normalized(np.clip(v, 0.0, None)))
    return FanoNet(p, s, nu, beta, A, a, M, f_list, g_list, ablation)


# ------------------------------------------------------------- verification

def f_separation_formula(p: int, s: float, gap: int) -> float:
    return 4 * p ** (-2 * s) * math.sin(math.pi * gap / p) ** 2


@dataclass(frozen=True)
class SeparationReport:
    min_f_sq: float
    min_g_sq: float
    f_formula_max_err: float
    g_floor: float               # 2 |c_p(g_1)|^2 4 sin^2(pi/p)
    g_reference_scaling: float     # p^(-2 nu - 2), a reference scaling for comparison only
    f_ok: bool
    g_ok: bool


def verify_separation(net: FanoNet) -> SeparationReport:
    p = net.p
    min_f = min_g = math.inf
    err = 0.0
    for j in range(p):
        for jj in range(j + 1, p):
            df = float(np.sum(np.abs(net.f_list[j].coeffs - net.f_list[jj].coeffs) ** 2))
            err = max(err, abs(df - f_separation_formula(p, net.s, jj - j)))
            min_f = min(min_f, df)
            dg = float(np.mean((net.g_list[j].values - net.g_list[jj].values) ** 2))
            min_g = min(min_g, dg)
    cp = abs(net.g_list[0].coef(p))
    g_floor = 2 * cp ** 2 * 4 * math.sin(math.pi / p) ** 2
    return SeparationReport(min_f, min_g, err, g_floor, p ** (-2 * net.nu - 2),
                            err <= 1e-12, min_g >= g_floor * (1 - 1e-10))


@dataclass(frozen=True)
class ClosenessReport:
    p: int
    tv: list          # [(j, value, stderr)] for j = 2..p, against j = 1
    max_tv: float
    max_stderr: float
    budget: int
    note: str = ("desk-scale surrogate: smallness and decay in p are checked instead of the "
                 "asymptotic (n log n)^-2 target")


def pair_tv(net: FanoNet, j: int, jj: int, budget: int, rng, Q=None):
    a = MixtureLaw(net.f_list[j - 1], net.g_list[j - 1])
    b = MixtureLaw(net.f_list[jj - 1], net.g_list[jj - 1])
    return tv_joint(a, b, method="monte-carlo", budget=budget, rng=rng, Q=Q)


def verify_closeness(net: FanoNet, budget: int = 20_000, seed: int = 0, workers: int = 1) -> ClosenessReport:
    """Monte Carlo TV of every (f_j, g_j) law against (f_1, g_1); substreams (seed, j)."""
    js = list(range(2, net.p + 1))

    def job(j):
        est = pair_tv(net, j, 1, budget, np.random.default_rng([seed, j]))
        return j, est.value, est.stderr

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(job, js))
    else:
        rows = [job(j) for j in js]
    k = int(np.argmax([r[1] for r in rows]))
    return ClosenessReport(net.p, rows, rows[k][1], rows[k][2], budget)


def phase_convention_check(p: int, s: float = 1.0, nu: float = 1.6, beta: float = 2.5, A: float = 2.0,
                           M: int = 256, budget: int = 20_000, seed: int = 0) -> dict:
    """Max TV of the net for each phase convention, to record which one keeps the laws close."""
    out = {}
    for sign, name in ((-1, "minus"), (1, "plus"), (0, "none")):
        out[name] = verify_closeness(build_net(p, s, nu, beta, A, M, phase_sign=sign), budget, seed).max_tv
    out["selected"] = min(("minus", "plus", "none"), key=lambda k: out[k])
    return out


# -------------------------------------------------------------------- Fano

def fano_bound(alpha_r: float, beta_r: float, r: float) -> float:
    """(alpha_r / 2) (1 - (beta_r + log 2) / log r), clamped at 0."""
    if r < 2:
        raise ValueError("need r >= 2")
    return max(0.0, 0.5 * alpha_r * (1.0 - (beta_r + math.log(2.0)) / math.log(r)))


def net_size(n: float, kappa: float = 12.5) -> int:
    """ceil(kappa log n) rounded up to a multiple of 4."""
    p = math.ceil(kappa * math.log(n))
    return int(4 * math.ceil(p / 4))


def _grid_for(p: int) -> int:
    M = max(256, 8 * p)
    return 1 << (M - 1).bit_length()


def kl_proxy(eta: float, n: float) -> float:
    """n sqrt(eta) log(1/eta): total KL over n observations from a per-observation TV eta."""
    if eta <= 0:
        return 0.0
    eta = min(eta, 1.0 / math.e)
    return n * math.sqrt(eta) * math.log(1.0 / eta)


def lower_bound_pipeline(n: float, s: float = 1.0, nu: float = 1.6, beta: float = 2.5, A: float = 2.0,
                         kappa: float = 12.5, budget: int = 4000, seed: int = 0, workers: int = 1,
                         pairs: int | None = None) -> dict:
    """Build the net for n, estimate closeness, and evaluate the Fano bound.

    ``pairs`` limits the TV estimates to the first few j (all by default).
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    p = net_size(n, kappa)
    M = _grid_for(p)
    net = build_net(p, s, nu, beta, A, M)
    sep = verify_separation(net)
    js = list(range(2, p + 1))[:pairs] if pairs else list(range(2, p + 1))
    rows = []
    for j in js:
        est = pair_tv(net, j, 1, budget, np.random.default_rng([seed, j]))
        rows.append((j, est.value, est.stderr))
    eta = max(r[1] for r in rows)
    beta_r = kl_proxy(eta, n)
    bound_f = fano_bound(sep.min_f_sq, beta_r, p)
    bound_g = fano_bound(sep.min_g_sq, beta_r, p)
    L = math.log(n)
    return {
        "n": n, "p": p, "M": M, "a": net.a, "R_n": 3 * math.sqrt(L),
        "alpha_f": sep.min_f_sq, "alpha_g": sep.min_g_sq,
        "max_tv": eta, "kl_proxy": beta_r,
        "fano_f": bound_f, "fano_g": bound_g,
        "scaling": {
            "f_2s+2": L ** -(2 * s + 2),
            "g_2nu+1": L ** -(2 * nu + 1),
            "g_2nu+2": L ** -(2 * nu + 2),
        },
        "inverse_problem": {"c": net.a, "beta": beta},
        "tv_rows": rows,
        "note": "two candidate exponents for the shift density, 2nu+1 and 2nu+2, are both listed",
    }
