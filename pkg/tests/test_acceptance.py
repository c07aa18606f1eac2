"""Acceptance checks 1-8. Each test prints one PASS/FAIL line before asserting."""
import json
import math
import time
from fractions import Fraction

import numpy as np
from scipy import stats

from shapelab import cli
from shapelab.config import density_from_table, load_config, shape_from_table
from shapelab.density import ShiftDensity
from shapelab.distances import MixtureLaw, tv_marginal
from shapelab.fano import build_net, f_separation_formula, fano_bound, verify_closeness, verify_separation
from shapelab.fourier import FourierSeries
from shapelab.identifiability import (bessel_equivalents_check, bessel_nth_derivative_at_zero_over_pi,
                                      build_bessel_table, lower_bound_integral_In)
from shapelab.mcmc import ChainConfig, effective_sample_size, median_stderr, run_chain
from shapelab.model import Dataset, generate_dataset
from shapelab.prior import (SievePriorConfig, sample_restricted_gp, sample_sieve_f, smallball_curve,
                            smallball_slope)
from shapelab.suites import identifiability_suite, shape_bound_suite, shift_chain_suite


def report(capsys, number, checks: dict, details: str = ""):
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}"
    if details:
        line += f" | {details}"
    if failed:
        line += f" | failed: {', '.join(failed)}"
    with capsys.disabled():
        print("\n" + line, flush=True)
    return ok


def default_truth():
    m = load_config()["model"]
    return shape_from_table(m["f0"]), density_from_table(m["g0"], m["M"]), m


# ------------------------------------------------------------------------ 1

def test_criterion_1_bound_suites(capsys):
    t0 = time.time()
    shape = shape_bound_suite(cases=50, budget=20_000, seed=0)
    shift = shift_chain_suite(cases=50, budget=20_000, seed=0)
    elapsed = time.time() - t0
    v_shape = sum(not r.ok for r in shape)
    v_shift = sum(not r.ok for r in shift)
    worst = max(r.tv / r.bound for r in shape)
    checks = {"shape bound violations == 0": v_shape == 0 and len(shape) == 50,
              "shift chain violations == 0": v_shift == 0 and len(shift) == 50,
              "runtime < 5 min": elapsed < 300}
    ok = report(capsys, 1, checks, f"violations shape {v_shape}, shift {v_shift}, max tv/bound {worst:.3f}, {elapsed:.0f}s")
    assert ok


# ------------------------------------------------------------------------ 2

def test_criterion_2_bessel(capsys):
    table = build_bessel_table(20, [0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0])
    max_rel = float(np.max(table.rel_err))
    exact = all(bessel_nth_derivative_at_zero_over_pi(n) == Fraction(2, 2 ** n) for n in range(0, 21))
    worst_low, worst_high = math.inf, 0.0
    for n in (4, 9, 16, 25):
        for a in np.linspace(0.01, math.sqrt(n), 40):
            r = bessel_equivalents_check(n, a).ratio_small_a / (1 + a / n)
            worst_low, worst_high = min(worst_low, r), max(worst_high, r)
    checks = {"series vs quadrature rel err <= 1e-10": max_rel <= 1e-10,
              "n-th derivative at 0 equals 2^(1-n) pi": exact,
              "small-argument ratio within factor 2 of 1 + a/n": worst_low >= 0.5 and worst_high <= 2.0}
    ok = report(capsys, 2, checks, f"max rel err {max_rel:.2e}, ratio/(1+a/n) in [{worst_low:.3f}, {worst_high:.3f}]")
    assert ok


# ------------------------------------------------------------------------ 3

def test_criterion_3_identifiability(capsys):
    In_min = min(lower_bound_integral_In(n, t) for n in range(0, 31) for t in (0.5, 1.0, 2.0))
    rows = identifiability_suite(cases=50, seed=0)
    viol = sum(not r.ok for r in rows)
    worst = max(r.bound / r.tv for r in rows)
    u = ShiftDensity.uniform(256)
    phase_gap = 0.0
    for k in (1, 2, 3):
        for th in (0.5, 1.3, 2.2):
            a = MixtureLaw(FourierSeries.from_dict({k: th}), u)
            b = MixtureLaw(FourierSeries.from_dict({k: th * np.exp(1.1j)}), u)
            phase_gap = max(phase_gap, tv_marginal(k, a, b).value)
    checks = {"I_n > 0 for n <= 30": In_min > 0,
              "quadratic form <= marginal TV on 50 pairs": viol == 0 and len(rows) == 50,
              "uniform g is phase invariant": phase_gap < 1e-10}
    ok = report(capsys, 3, checks, f"min I_n {In_min:.3e}, violations {viol}, max bound/tv {worst:.3f}, "
                                   f"phase TV {phase_gap:.1e}")
    assert ok


# ------------------------------------------------------------------------ 4

def test_criterion_4_small_ball(capsys):
    t0 = time.time()
    eps = [0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6]
    checks, parts = {}, []
    for k in (0, 1):
        est = smallball_curve(k, eps, 100_000, N_kl=512, M=256, rng=[20240601, k])
        slope, _, used = smallball_slope(est)
        target = 1.0 / (k + 0.5)
        checks[f"k={k} slope within 25% of {target:.3f}"] = used >= 2 and abs(slope / target - 1) <= 0.25
        mono = all(b.estimate >= a.estimate - 2 * math.hypot(a.stderr, b.stderr) for a, b in zip(est, est[1:]))
        checks[f"k={k} monotone in eps"] = mono
        parts.append(f"k={k}: slope {slope:.3f} on {used} points (target {target:.3f}), "
                     f"P = {', '.join(f'{e.estimate:.3g}' for e in est)}")
    # exact Kolmogorov law of the bridge sup separates estimator error from the choice of eps range
    x = np.log(1 / np.array(eps))
    y = np.log(-np.log(stats.kstwobign.cdf(eps)))
    parts.append(f"exact k=0 slope on the same range {np.polyfit(x, y, 1)[0]:.3f}")
    elapsed = time.time() - t0
    checks["runtime < 10 min"] = elapsed < 600
    ok = report(capsys, 4, checks, "; ".join(parts) + f"; {elapsed:.0f}s")
    assert ok


# ------------------------------------------------------------------------ 5

def test_criterion_5_prior(capsys):
    cfg = SievePriorConfig(n=100, c_lambda=0.1, K_max=8)
    rng = np.random.default_rng(5)
    draws = 100_000
    levels = np.empty(draws, int)
    sq = {0: [], -1: [], 1: [], 2: []}
    first_positive = True
    for i in range(draws):
        f, lv = sample_sieve_f(cfg, rng, return_level=True)
        levels[i] = lv
        first_positive &= f[1].imag == 0 and f[1].real > 0
        for k in (0, -1, 1):
            sq[k].append(abs(f[k]) ** 2)
        if lv >= 2:
            sq[2].append(abs(f[2]) ** 2)
    counts = np.bincount(levels, minlength=cfg.K_max + 1)[1:]
    expected = cfg.level_probabilities() * draws
    keep = expected >= 5
    obs = np.r_[counts[keep], counts[~keep].sum()]
    exp = np.r_[expected[keep], expected[~keep].sum()]
    pval = stats.chisquare(obs, exp).pvalue
    var_err = max(abs(np.mean(v) / cfg.xi2 - 1) for v in sq.values())
    ball = True
    grng = np.random.default_rng(6)
    for A in (2.0, 0.5):
        for _ in range(300):
            g = sample_restricted_gp(1.6, A, 256, 256, rng=grng)[1]
            ball &= g.sobolev_seminorm(1.6) <= 2 * A
    checks = {"level chi-square p > 0.01": pval > 0.01,
              "theta_1 > 0 on every draw": bool(first_positive),
              "conditional coefficient variance within 5%": var_err <= 0.05,
              "every accepted g inside the 2A ball": bool(ball)}
    ok = report(capsys, 5, checks, f"chi-square p {pval:.3f}, max variance error {100 * var_err:.2f}%")
    assert ok


# ------------------------------------------------------------------------ 6

def effective_chi_square(levels, probs):
    """Chi-square on the level histogram with counts scaled to the effective sample size."""
    n = levels.size
    ess = min(effective_sample_size((levels == l).astype(float)) for l in range(1, probs.size + 1))
    counts = np.bincount(levels, minlength=probs.size + 1)[1:] * (ess / n)
    stat = float(np.sum((counts - probs * ess) ** 2 / (probs * ess)))
    return float(stats.chi2.sf(stat, probs.size - 1)), ess


def test_criterion_6_mcmc(capsys):
    # prior recovery with a constant likelihood
    cfg = ChainConfig(iters=100_000, thin=1, c_lambda=0.1, prior_n=100, allow_empty=True, f_scale=0.3,
                      M=64, N_kl=64)
    res = run_chain(Dataset([], 3), cfg, 61)
    prior = SievePriorConfig(100, c_lambda=0.1)
    levels = np.array([s.level for s in res.samples])
    pval, ess_levels = effective_chi_square(levels, prior.level_probabilities(3))
    K = 3
    var_err = 0.0
    for k, mask in ((0, None), (-1, None), (1, None), (2, levels >= 2)):
        v = np.array([abs(s.theta[K + k]) ** 2 for s in res.samples])
        v = v if mask is None else v[mask]
        var_err = max(var_err, abs(v.mean() / prior.xi2 - 1))

    # cache coherence on every accepted move
    f0, g0, m = default_truth()
    data = generate_dataset(f0, g0, 100, m["K"], 62)
    dbg = run_chain(data, ChainConfig(iters=10_000, debug=True, c_lambda=0.3, hellinger_budget=200), 63)

    # two-seed replication of posterior medians
    rep_cfg = ChainConfig(iters=8000, hellinger_budget=500, hellinger_every=4)
    a = run_chain(data, rep_cfg, 64, truth=(f0, g0)).summary
    b = run_chain(data, rep_cfg, 65, truth=(f0, g0)).summary
    rep = {}
    for name in ("dist_theta1", "dist_f", "dist_g", "hellinger"):
        se = math.hypot(median_stderr(a.distances[name]), median_stderr(b.distances[name]))
        rep[name] = abs(a.medians[name] - b.medians[name]) / se
    checks = {"prior recovery: level histogram": pval > 0.01,
              "prior recovery: coefficient variances within 5%": var_err <= 0.05,
              "cache coherence <= 1e-8 over 1e4 debug sweeps": dbg.max_cache_error <= 1e-8,
              "two-seed medians within 2x combined error": all(v <= 2 for v in rep.values())}
    ok = report(capsys, 6, checks,
                f"level p {pval:.3f} (ESS {ess_levels:.0f}), max variance error {100 * var_err:.2f}%, "
                f"max cache error {dbg.max_cache_error:.1e}, replication z "
                + ", ".join(f"{k} {v:.2f}" for k, v in rep.items()))
    assert ok


# ------------------------------------------------------------------------ 7

def test_criterion_7_contraction(capsys, tmp_path):
    t0 = time.time()
    code = cli.main(["contraction", "--out", str(tmp_path), "--seed", "0"])
    elapsed = time.time() - t0
    summary = json.loads((tmp_path / "contraction.json").read_text())
    dec = summary["strictly_decreasing"]
    table = summary["table"]
    semilog = (tmp_path / "contraction_semilog.svg").read_text()
    loglog = (tmp_path / "contraction_loglog.svg").read_text()
    checks = {"Hellinger medians strictly decreasing": dec["hellinger"],
              "|theta_1 - theta_1^0| medians strictly decreasing": dec["dist_theta1"],
              "||g - g0|| medians strictly decreasing": dec["dist_g"],
              "overlays drawn": "eps_n" in loglog and "(log n)^-nu" in semilog and "eps_n" in semilog,
              "exit code 0": code == 0,
              "runtime < 60 min": elapsed < 3600}
    meds = "; ".join(f"n={t['n']}: H {t['medians']['hellinger']:.3f}, th1 {t['medians']['dist_theta1']:.3f}, "
                     f"g {t['medians']['dist_g']:.3f}" for t in table)
    ok = report(capsys, 7, checks, f"{meds}; {elapsed:.0f}s")
    assert ok


# ------------------------------------------------------------------------ 8

def test_criterion_8_fano(capsys):
    nets = {p: build_net(p, 1.0, 1.6, 2.5, 2.0, M=256) for p in (4, 8)}
    sep_err = 0.0
    valid = True
    x = np.arange(4096) / 4096
    for p, net in nets.items():
        sep = verify_separation(net)
        valid &= all(g.values.min() >= 0 and abs(g.values.mean() - 1) < 1e-12 for g in net.g_list)
        for j in range(p):
            for jj in range(j + 1, p):
                # brute force: mean of |f_j - f_jj|^2 on a grid exact for the band
                fj, fjj = (sum(c * np.exp(2j * np.pi * l * x) for l, c in zip(f.frequencies, f.coeffs))
                           for f in (net.f_list[j], net.f_list[jj]))
                brute = float(np.mean(np.abs(fj - fjj) ** 2))
                sep_err = max(sep_err, abs(brute - f_separation_formula(p, 1.0, jj - j)))
        sep_err = max(sep_err, sep.f_formula_max_err)
        valid &= sep.g_ok
    close = {p: verify_closeness(net, budget=20_000, seed=8) for p, net in nets.items()}
    ablated = verify_closeness(build_net(4, 1.0, 1.6, 2.5, 2.0, M=256, ablation="uniform"), budget=20_000, seed=8)
    ratio = ablated.max_tv / close[4].max_tv
    hand = [(fano_bound(1.0, 0.0, 8.0), 0.5 * (1 - math.log(2) / math.log(8))),
            (fano_bound(0.2, 1.0, 100.0), 0.1 * (1 - (1 + math.log(2)) / math.log(100))),
            (fano_bound(0.5, 3.0, 10.0), 0.0)]
    checks = {"separation identities exact to 1e-12": sep_err <= 1e-12,
              "all g_j valid densities": bool(valid),
              "max TV at p=8 below 0.05": close[8].max_tv < 0.05,
              "max TV at p=8 below p=4": close[8].max_tv < close[4].max_tv,
              "ablation raises max TV at p=4 by >= 5x": ratio >= 5,
              "fano bound matches hand arithmetic": all(abs(a - b) < 1e-15 for a, b in hand)}
    ok = report(capsys, 8, checks, f"sep err {sep_err:.1e}, max TV p=4 {close[4].max_tv:.4f} "
                                   f"p=8 {close[8].max_tv:.2e}, ablation {ablated.max_tv:.3f} ({ratio:.1f}x)")
    assert ok
