"""Experiment configuration: defaults, merging and validation.

A config file is JSON with a ``schema_version`` and optional per-command
blocks. Keys not present in the defaults are rejected. Shape and density
tables map frequencies (as strings) to [re, im] pairs.
"""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import numpy as np

from .density import ShiftDensity
from .errors import ConfigError
from .fourier import FourierSeries

SCHEMA_VERSION = 1
OUT_ENV = "SHAPELAB_OUT"

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "workers": 1,
    "data": None,
    "model": {
        "f0": {"-1": [0.3, 0.0], "0": [0.3, 0.0], "1": [1.0, 0.0], "2": [0.35355339059327373, 0.35355339059327373]},
        "g0": {"1": [0.19121717, 0.16105446], "2": [0.125, 0.0]},
        "n": 100,
        "K": 4,
        "M": 256,
        "s": 1.0,
        "nu": 1.6,
        "A": 2.0,
    },
    "prior": {
        "c_lambda": 1.0,
        "rho": 1.5,
        "K_max": 32,
        "draws": 8,
        "N_kl": 256,
        "max_attempts": 1000,
        "smallball": {
            "k": [0, 1],
            "eps": [0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6],
            "reps": 100_000,
            "N_kl": 512,
            "M": 256,
        },
    },
    "mcmc": {
        "iters": 20_000,
        "burn_in": None,
        "thin": 5,
        "beta_pcn": 0.2,
        "f_scale": 0.05,
        "N_kl": 256,
        "chains": 1,
        "adapt": True,
        "hellinger_budget": 1000,
        "hellinger_every": 1,
    },
    "distances": {"cases": 50, "budget": 20_000},
    "identifiability": {
        "n_max": 20,
        "a_grid": [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
        "In_n_max": 30,
        "In_theta1": [0.5, 1.0, 2.0],
        "cases": 50,
        "N": 8,
    },
    "fano": {
        "p": [4, 8],
        "s": 1.0,
        "nu": 1.6,
        "beta": 2.5,
        "A": 2.0,
        "M": 256,
        "budget": 20_000,
        "pipeline_n": [100],
        "pipeline_budget": 4000,
    },
    "contraction": {"n_grid": [25, 100, 400]},
}

# blocks whose keys are free-form (frequency tables)
_FREE = {("model", "f0"), ("model", "g0")}


def _merge(base: dict, over: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        here = path + (k,)
        if k not in base:
            raise ConfigError(f"unknown config key {'.'.join(here)!r}")
        if here in _FREE:
            if not isinstance(v, dict):
                raise ConfigError(f"{'.'.join(here)} must be a table")
            out[k] = copy.deepcopy(v)
        elif isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{'.'.join(here)} must be an object")
            out[k] = _merge(base[k], v, here)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    user = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        if user.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def _need(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def validate(cfg: dict):
    """Check every parameter against module preconditions before any work starts."""
    _need(_int(cfg["seed"]) and 0 <= cfg["seed"] < 2 ** 64, "seed must be an unsigned 64-bit integer")
    _need(_int(cfg["workers"]) and cfg["workers"] >= 1, "workers must be >= 1")
    m = cfg["model"]
    _need(_int(m["n"]) and m["n"] >= 1, "model.n must be >= 1")
    _need(_int(m["K"]) and m["K"] >= 1, "model.K must be >= 1")
    _need(_int(m["M"]) and m["M"] >= 64 and m["M"] % 2 == 0, "model.M must be an even integer >= 64")
    _need(_num(m["nu"]) and m["nu"] >= 0.5, "model.nu must be >= 1/2")
    _need(_num(m["A"]) and m["A"] > 0, "model.A must be positive")
    _need(_num(m["s"]) and m["s"] > 0, "model.s must be positive")
    shape_from_table(m["f0"])
    density_from_table(m["g0"], m["M"])
    p = cfg["prior"]
    _need(_num(p["rho"]) and 1 < p["rho"] < 2, "prior.rho must lie in (1, 2)")
    _need(_num(p["c_lambda"]) and p["c_lambda"] > 0, "prior.c_lambda must be positive")
    _need(_int(p["K_max"]) and p["K_max"] >= 1, "prior.K_max must be >= 1")
    _need(_int(p["draws"]) and p["draws"] >= 0, "prior.draws must be >= 0")
    _need(_int(p["N_kl"]) and p["N_kl"] >= 16, "prior.N_kl must be >= 16")
    sb = p["smallball"]
    _need(all(_int(k) and k >= 0 for k in sb["k"]), "prior.smallball.k must be nonnegative integers")
    _need(all(_num(e) and e > 0 for e in sb["eps"]), "prior.smallball.eps must be positive")
    _need(_int(sb["reps"]) and sb["reps"] >= 100, "prior.smallball.reps must be >= 100")
    mc = cfg["mcmc"]
    _need(_int(mc["iters"]) and mc["iters"] >= 2, "mcmc.iters must be >= 2")
    _need(mc["burn_in"] is None or (_int(mc["burn_in"]) and 0 <= mc["burn_in"] < mc["iters"]),
          "mcmc.burn_in must be below iters")
    _need(_int(mc["thin"]) and mc["thin"] >= 1, "mcmc.thin must be >= 1")
    _need(_num(mc["beta_pcn"]) and 0 < mc["beta_pcn"] <= 1, "mcmc.beta_pcn must lie in (0, 1]")
    _need(_num(mc["f_scale"]) and mc["f_scale"] >= 0, "mcmc.f_scale must be >= 0")
    _need(_int(mc["chains"]) and mc["chains"] >= 1, "mcmc.chains must be >= 1")
    d = cfg["distances"]
    _need(_int(d["cases"]) and d["cases"] >= 1, "distances.cases must be >= 1")
    _need(_int(d["budget"]) and d["budget"] >= 100, "distances.budget must be >= 100")
    idf = cfg["identifiability"]
    _need(all(_num(a) and 0 <= a <= 700 for a in idf["a_grid"]), "identifiability.a_grid must lie in [0, 700]")
    _need(all(_num(t) and 0 < t <= 10 for t in idf["In_theta1"]), "identifiability.In_theta1 must lie in (0, 10]")
    f = cfg["fano"]
    _need(all(_int(q) and q >= 4 and q % 4 == 0 for q in f["p"]), "fano.p must be multiples of 4")
    _need(_num(f["beta"]) and f["beta"] > f["nu"] + 0.5 and f["beta"] > 1, "fano.beta must exceed nu + 1/2 and 1")
    _need(all(_num(n) and n >= 3 for n in f["pipeline_n"]), "fano.pipeline_n must be >= 3")
    c = cfg["contraction"]
    _need(len(c["n_grid"]) >= 1 and all(_int(n) and n >= 2 for n in c["n_grid"]),
          "contraction.n_grid must hold integers >= 2")


def _complex_table(table: dict) -> dict:
    out = {}
    for k, v in table.items():
        try:
            kk = int(k)
        except ValueError as exc:
            raise ConfigError(f"frequency key {k!r} is not an integer") from exc
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out[kk] = complex(v)
        elif isinstance(v, list) and len(v) == 2 and all(_num(x) for x in v):
            out[kk] = complex(v[0], v[1])
        else:
            raise ConfigError(f"coefficient for {k} must be a number or [re, im]")
    return out


def shape_from_table(table: dict) -> FourierSeries:
    t = _complex_table(table)
    th1 = t.get(1, 0)
    ident = th1.imag == 0 and th1.real > 0
    return FourierSeries.from_dict(t, identifiable=ident)


def density_from_table(table: dict, M: int) -> ShiftDensity:
    t = _complex_table(table)
    total = sum(2 * abs(c) for k, c in t.items() if k > 0)
    if total > 1:
        raise ConfigError("density table must satisfy 2 sum |c_k| <= 1 to stay nonnegative")
    try:
        return ShiftDensity.from_fourier(t, M)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit seed for a substream, independent of scheduling."""
    return int(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(1, np.uint64)[0])
