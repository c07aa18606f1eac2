"""Command-line entry point: ``shapelab <verb> [--config PATH] [--seed N] [--out DIR] [--workers N]``.

Exit codes: 0 success, 1 other error, 2 config error, 3 numeric failure,
4 budget or acceptance failure. Failures write ``error.json`` to the output
directory.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import artifacts as art
from .config import OUT_ENV, ConfigError, density_from_table, derive_seed, load_config, shape_from_table
from .errors import BudgetWarning, ChainDivergenceError
from .model import Dataset, generate_dataset

VERBS = ("simulate", "prior", "posterior", "distances", "identifiability", "fano", "contraction", "report")
EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3, 4


class AcceptanceFailure(RuntimeError):
    """A command finished but its built-in acceptance check did not hold."""


def _truth(cfg):
    m = cfg["model"]
    return shape_from_table(m["f0"]), density_from_table(m["g0"], m["M"])


def _chain_config(cfg, **extra):
    from .mcmc import ChainConfig
    m, p, mc = cfg["model"], cfg["prior"], cfg["mcmc"]
    return ChainConfig(iters=mc["iters"], burn_in=mc["burn_in"], thin=mc["thin"], beta_pcn=mc["beta_pcn"],
                       f_scale=mc["f_scale"], nu=m["nu"], A=m["A"], M=m["M"], N_kl=mc["N_kl"],
                       rho=p["rho"], c_lambda=p["c_lambda"], K_max=p["K_max"], adapt=mc["adapt"],
                       hellinger_budget=mc["hellinger_budget"], hellinger_every=mc["hellinger_every"],
                       hellinger_seed=derive_seed(cfg["seed"], 99), **extra)


# -------------------------------------------------------------------- verbs

def cmd_simulate(cfg, out: Path):
    f0, g0 = _truth(cfg)
    m = cfg["model"]
    data = generate_dataset(f0, g0, m["n"], m["K"], cfg["seed"])
    art.write_json(out / "dataset.json", data.to_json(), cfg)
    return {"dataset": "dataset.json", "n": data.n}


def cmd_prior(cfg, out: Path):
    from .prior import (SievePriorConfig, sample_restricted_gp, sample_sieve_f, smallball_curve,
                        smallball_slope)
    m, p = cfg["model"], cfg["prior"]
    sc = SievePriorConfig(max(m["n"], 2), p["rho"], p["c_lambda"], p["K_max"])
    draws = []
    for i in range(p["draws"]):
        rng = np.random.default_rng(derive_seed(cfg["seed"], 1, i))
        f, level = sample_sieve_f(sc, rng, return_level=True)
        _, g, attempts = sample_restricted_gp(m["nu"], m["A"], m["M"], p["N_kl"], p["max_attempts"], rng)
        draws.append({"level": level, "f": f.with_cutoff(level).to_json(), "g": g.to_json(),
                      "attempts": attempts, "seminorm": g.sobolev_seminorm(m["nu"])})
    art.write_json(out / "prior_draws.json", {"seed": cfg["seed"], "draws": draws}, cfg)
    sb = p["smallball"]
    rows, slopes = [], {}
    for k in sb["k"]:
        est = smallball_curve(k, sb["eps"], sb["reps"], sb["N_kl"], sb["M"], derive_seed(cfg["seed"], 2, k))
        for e in est:
            rows.append([k, e.epsilon, e.reps, e.estimate, e.stderr, e.censored, e.upper_bound])
        slope, _, used = smallball_slope(est)
        target = 1.0 / (k + 0.5)
        slopes[str(k)] = {"slope": slope, "target": target, "points": used,
                          "rel_err": abs(slope - target) / target if math.isfinite(slope) else None}
    art.write_csv(out / "smallball.csv", ["k", "eps", "reps", "estimate", "stderr", "censored", "upper_bound"],
                  rows, cfg)
    summary = {"seed": cfg["seed"], "xi2": sc.xi2,
               "level_probabilities": sc.level_probabilities().tolist(),
               "smallball_slopes": slopes}
    art.write_json(out / "prior_summary.json", summary, cfg)
    return summary


def _load_or_simulate(cfg):
    if cfg["data"]:
        try:
            obj = json.loads(Path(cfg["data"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read dataset {cfg['data']}: {exc}") from exc
        data = Dataset.from_json(obj)
        return data, data.truth
    f0, g0 = _truth(cfg)
    m = cfg["model"]
    return generate_dataset(f0, g0, m["n"], m["K"], cfg["seed"]), (f0, g0)


def cmd_posterior(cfg, out: Path):
    from .mcmc import cutoff_diagnostics, run_chains, summarize, RADIUS_MULTIPLIERS
    data, truth = _load_or_simulate(cfg)
    cc = _chain_config(cfg)
    seeds = [derive_seed(cfg["seed"], 3, c) for c in range(cfg["mcmc"]["chains"])]
    results = run_chains(data, cc, seeds, truth, workers=cfg["workers"])
    rows, pooled = [], []
    for c, res in enumerate(results):
        pooled.extend(res.samples)
        d = res.summary.distances if res.summary else None
        for i, smp in enumerate(res.samples):
            base = [smp.sweep, c, smp.level, float(smp.theta[data.K + 1].real)]
            if d is not None:
                base += [d["dist_f"][i], d["dist_g"][i], d["dist_theta1"][i], d["hellinger"][i]]
            rows.append(base)
    header = ["iter", "chain", "level", "theta1"]
    if truth is not None:
        header += ["dist_f", "dist_g", "dist_theta1", "hellinger"]
    art.write_csv(out / "chain.csv", header, rows, cfg)
    summary = {"seed": cfg["seed"], "n": data.n,
               "chains": [{"seed": r.seed, "acceptance": {k: (a / p if p else None) for k, (p, a) in r.stats.items()},
                           "beta_pcn": r.beta_pcn,
                           "summary": r.summary.to_json() if r.summary else None} for r in results]}
    if truth is not None:
        merged = {k: np.concatenate([r.summary.distances[k] for r in results]) for k in results[0].summary.distances}
        ps = summarize(pooled, truth, data.n, cc, s=cfg["model"]["s"], distances=merged)
        summary["pooled"] = ps.to_json()
        summary["cutoff"] = cutoff_diagnostics(pooled, truth, max(data.n, 2), cfg["model"]["s"], cfg["model"]["nu"])
        series = [{"label": k, "x": [m * ps.radii[k] for m in RADIUS_MULTIPLIERS], "y": v}
                  for k, v in ps.mass_curves.items()]
        art.line_plot(out / "mass_curves.svg", series, "posterior mass within radius", "radius", "mass",
                      logx=True, config=cfg)
    art.write_json(out / "posterior_summary.json", summary, cfg)
    return summary


def cmd_distances(cfg, out: Path):
    from .suites import shape_bound_suite, shift_chain_suite
    d = cfg["distances"]
    rows = shape_bound_suite(d["cases"], d["budget"], cfg["seed"], cfg["model"]["M"], cfg["workers"])
    rows += shift_chain_suite(d["cases"], d["budget"], cfg["seed"], cfg["model"]["M"], cfg["workers"])
    art.write_csv(out / "bounds.csv", ["suite", "case", "tv", "stderr", "bound", "ok"],
                  [[r.suite, r.case, r.tv, r.stderr, r.bound, r.ok] for r in rows], cfg)
    viol = {s: sum(1 for r in rows if r.suite == s and not r.ok) for s in ("shape_bound", "shift_chain")}
    summary = {"seed": cfg["seed"], "cases": d["cases"], "budget": d["budget"], "violations": viol}
    art.write_json(out / "distances_summary.json", summary, cfg)
    if any(viol.values()):
        raise AcceptanceFailure(f"bound violations: {viol}")
    return summary


def cmd_identifiability(cfg, out: Path):
    from .identifiability import (build_bessel_table, lower_bound_integral_In, theta1_disk_lower_bound,
                                  thetak_phase_lower_bound, calibrate_phase_constant, PHASE_CONSTANT)
    from .density import ShiftDensity
    from .suites import identifiability_suite
    idf = cfg["identifiability"]
    table = build_bessel_table(idf["n_max"], idf["a_grid"])
    art.write_csv(out / "bessel.csv", ["n", "a", "series", "quadrature", "rel_err"], list(table.rows()), cfg)
    In_rows = [[n, t, lower_bound_integral_In(n, t)] for t in idf["In_theta1"] for n in range(idf["In_n_max"] + 1)]
    art.write_csv(out / "In.csv", ["n", "theta1", "I_n"], In_rows, cfg)
    rows = []
    for r in identifiability_suite(idf["cases"], cfg["seed"], idf["N"], cfg["model"]["M"]):
        rows.append([f"quadratic_form_{r.case}", r.bound, r.tv, r.stderr, r.ok])
    g_ref = ShiftDensity.from_fourier({1: 0.25}, cfg["model"]["M"])
    g_alt = ShiftDensity.from_fourier({1: 0.15j, 2: 0.1}, cfg["model"]["M"])
    for t0 in (0.5, 1.0, 2.0):
        for eta in (0.05, 0.1, 0.2):
            if eta < t0 / 2:
                tv, floor = theta1_disk_lower_bound(t0 + eta, t0, g_alt, g_ref)
                rows.append([f"disk_t0={t0}_eta={eta}", floor, tv, 0.0, floor <= tv])
    for gap in (np.pi / 4, np.pi / 2, np.pi):
        tv, floor = thetak_phase_lower_bound(1, np.exp(1j * gap), 1.0, g_ref)
        rows.append([f"phase_gap={gap:.4f}", floor, tv, 0.0, floor <= tv])
    art.write_csv(out / "lower_bounds.csv", ["case", "lower_bound", "tv", "stderr", "ok"], rows, cfg)
    viol = sum(1 for r in rows if not r[-1])
    summary = {"seed": cfg["seed"], "bessel_max_rel_err": float(np.nanmax(table.rel_err)),
               "In_min": min(r[2] for r in In_rows), "lower_bound_violations": viol,
               "phase_constant": PHASE_CONSTANT, "phase_calibration": calibrate_phase_constant()}
    art.write_json(out / "identifiability_summary.json", summary, cfg)
    if viol:
        raise AcceptanceFailure(f"{viol} lower-bound violations")
    return summary


def cmd_fano(cfg, out: Path):
    from .fano import build_net, lower_bound_pipeline, verify_closeness, verify_separation
    f = cfg["fano"]
    nets = {}
    for p in f["p"]:
        net = build_net(p, f["s"], f["nu"], f["beta"], f["A"], f["M"])
        sep = verify_separation(net)
        clo = verify_closeness(net, f["budget"], derive_seed(cfg["seed"], 4, p), cfg["workers"])
        abl = verify_closeness(build_net(p, f["s"], f["nu"], f["beta"], f["A"], f["M"], ablation="uniform"),
                               f["budget"], derive_seed(cfg["seed"], 4, p), cfg["workers"])
        art.write_json(out / f"net_p{p}.json", net.to_json(), cfg)
        art.write_csv(out / f"closeness_p{p}.csv", ["pair", "tv", "stderr"],
                      [[f"{j}-1", v, se] for j, v, se in clo.tv], cfg)
        nets[str(p)] = {"a": net.a, "min_f_sq": sep.min_f_sq, "min_g_sq": sep.min_g_sq,
                        "f_formula_max_err": sep.f_formula_max_err, "g_floor": sep.g_floor,
                        "g_reference_scaling": sep.g_reference_scaling, "f_ok": sep.f_ok, "g_ok": sep.g_ok,
                        "max_tv": clo.max_tv, "max_tv_stderr": clo.max_stderr,
                        "ablation_max_tv": abl.max_tv, "note": clo.note}
    pipes = [lower_bound_pipeline(n, f["s"], f["nu"], f["beta"], f["A"], budget=f["pipeline_budget"],
                                  seed=derive_seed(cfg["seed"], 5, i)) for i, n in enumerate(f["pipeline_n"])]
    for pp in pipes:
        pp.pop("tv_rows")
    summary = {"seed": cfg["seed"], "nets": nets, "pipeline": pipes, "phase_convention": "exp(-i 2 pi l (j-1)/p)"}
    art.write_json(out / "fano_summary.json", summary, cfg)
    return summary


def cmd_contraction(cfg, out: Path):
    from .mcmc import epsilon_n, log_radius, run_chains
    f0, g0 = _truth(cfg)
    m = cfg["model"]
    grid = sorted(cfg["contraction"]["n_grid"])
    full = generate_dataset(f0, g0, grid[-1], m["K"], cfg["seed"])
    cc = _chain_config(cfg)
    rows, table = [], []
    for i, n in enumerate(grid):
        seeds = [derive_seed(cfg["seed"], 6, n, c) for c in range(cfg["mcmc"]["chains"])]
        res = run_chains(full.subset(n), cc, seeds, (f0, g0), workers=cfg["workers"])
        d = {k: np.concatenate([r.summary.distances[k] for r in res]) for k in res[0].summary.distances}
        med = {k: float(np.median(v)) for k, v in d.items()}
        entry = {"n": n, "medians": med, "epsilon_n": epsilon_n(n, m["s"], m["nu"]),
                 "log_radius": log_radius(n, m["nu"]),
                 "median_stderr": {k: r for k, r in res[0].summary.median_se.items()}}
        table.append(entry)
        rows.append([n, med["hellinger"], med["dist_theta1"], med["dist_f"], med["dist_g"],
                     entry["epsilon_n"], entry["log_radius"]])
    art.write_csv(out / "contraction.csv",
                  ["n", "median_hellinger", "median_dist_theta1", "median_dist_f", "median_dist_g",
                   "epsilon_n", "log_n_pow_minus_nu"], rows, cfg)
    ns = [r[0] for r in rows]
    h = [r[1] for r in rows]
    gd = [r[4] for r in rows]
    eps = [r[5] for r in rows]
    lr = [r[6] for r in rows]
    art.line_plot(out / "contraction_loglog.svg",
                  [{"label": "median Hellinger", "x": ns, "y": h},
                   {"label": "eps_n (scaled)", "x": ns, "y": [e * h[0] / eps[0] for e in eps], "dashed": True}],
                  "Hellinger to truth", "n", "distance", logx=True, logy=True, config=cfg)
    art.line_plot(out / "contraction_semilog.svg",
                  [{"label": "median ||g - g0||", "x": [math.log(n) for n in ns], "y": gd},
                   {"label": "(log n)^-nu (scaled)", "x": [math.log(n) for n in ns],
                    "y": [v * gd[0] / lr[0] for v in lr], "dashed": True},
                   {"label": "eps_n (scaled)", "x": [math.log(n) for n in ns],
                    "y": [e * gd[0] / eps[0] for e in eps], "dashed": True}],
                  "shift density error", "log n", "distance", logy=True, config=cfg)
    decreasing = {k: all(a[k] > b[k] for a, b in zip([t["medians"] for t in table], [t["medians"] for t in table][1:]))
                  for k in ("hellinger", "dist_theta1", "dist_g", "dist_f")}
    summary = {"seed": cfg["seed"], "table": table, "strictly_decreasing": decreasing,
               "overlays": "eps_n and (log n)^-nu are drawn for comparison; exponents are not asserted"}
    art.write_json(out / "contraction.json", summary, cfg)
    if not all(decreasing[k] for k in ("hellinger", "dist_theta1", "dist_g")):
        raise AcceptanceFailure(f"medians not strictly decreasing: {decreasing}")
    return summary


REPORT_SOURCES = ("prior_summary.json", "posterior_summary.json", "distances_summary.json",
                  "identifiability_summary.json", "fano_summary.json", "contraction.json")


def cmd_report(cfg, out: Path):
    found = {}
    for name in REPORT_SOURCES:
        p = out / name
        if p.exists():
            obj = json.loads(p.read_text())
            obj.pop("config", None)
            found[name] = obj
    lines = ["# shapelab report", ""]
    for name, obj in found.items():
        lines.append(f"## {name}")
        lines.append("")
        lines.append("```json")
        lines.append(art.dumps(obj, indent=2))
        lines.append("```")
        lines.append("")
    if not found:
        lines.append("no summaries found in this directory")
    (out / "report.md").write_text("\n".join(lines) + "\n")
    art.write_json(out / "report.json", {"seed": cfg["seed"], "sources": sorted(found), "summaries": found}, cfg)
    return {"sources": sorted(found)}


COMMANDS = {
    "simulate": cmd_simulate, "prior": cmd_prior, "posterior": cmd_posterior, "distances": cmd_distances,
    "identifiability": cmd_identifiability, "fano": cmd_fano, "contraction": cmd_contraction,
    "report": cmd_report,
}


# --------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(prog="shapelab", description="Shifted-curves model laboratory")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", default=None, help="JSON config file")
    ap.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
    ap.add_argument("--out", default=None, help=f"output directory (else ${OUT_ENV}, else ./shapelab_out)")
    ap.add_argument("--workers", type=int, default=None)
    return ap


def _error(out: Path, verb, exc, code, cfg=None):
    out.mkdir(parents=True, exist_ok=True)
    body = {"command": verb, "error_type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ChainDivergenceError):
        body["state_dump"] = exc.state_dump
    if code == EXIT_ERROR:
        body["traceback"] = traceback.format_exc()
    art.write_json(out / "error.json", body, cfg)
    print(f"shapelab {verb}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out or os.environ.get(OUT_ENV) or "shapelab_out")
    cfg = None
    try:
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.workers is not None:
            over["workers"] = args.workers
        cfg = load_config(args.config, over)
    except ConfigError as exc:
        return _error(out, args.verb, exc, EXIT_CONFIG)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", BudgetWarning)
            COMMANDS[args.verb](cfg, out)
    except ConfigError as exc:
        return _error(out, args.verb, exc, EXIT_CONFIG, cfg)
    except (ChainDivergenceError, FloatingPointError) as exc:
        return _error(out, args.verb, exc, EXIT_NUMERIC, cfg)
    except (AcceptanceFailure, BudgetWarning) as exc:
        return _error(out, args.verb, exc, EXIT_BUDGET, cfg)
    except Exception as exc:  # noqa: BLE001 - any module error becomes a machine-readable record
        return _error(out, args.verb, exc, EXIT_ERROR, cfg)
    err = out / "error.json"
    if err.exists():
        err.unlink()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
