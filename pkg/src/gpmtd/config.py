"""Run configuration: schema validation, default materialization, manifests.

Configs are YAML (JSON is accepted as a subset)::

    data:   {path, column, header, log}
    model:  {lags, smoothness, priors: {...}}
    mcmc:   {n_adapt, n_burn, n_keep, thin, target_acceptance,
             initial_proposal_sd, n_chains, seed, n_threads}
    output: {directory, store_f, grid: {n_points, padding}}

Prior keys mirror :class:`gpmtd.model.Hyperparameters`; per-component
entries accept a scalar (broadcast) or a list of length ``L + 1``.  A
``manifest`` section, as written by ``fit``, is accepted and checked.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, GpmtdError
from .model import Hyperparameters, TimeSeriesData, default_hyperparameters
from .sampler import McmcConfig
from .sbm import SbmParams

SECTIONS = {"data", "model", "mcmc", "output", "manifest"}
DATA_KEYS = {"path", "column", "header", "log"}
MODEL_KEYS = {"lags", "smoothness", "priors"}
OUTPUT_KEYS = {"directory", "store_f", "grid"}
GRID_KEYS = {"n_points", "padding"}
MCMC_KEYS = {f.name for f in fields(McmcConfig)} - {"store_f"}
PER_COMPONENT = ("level_mean", "level_var", "sigma_dof", "sigma_scale")
SCALAR_PRIORS = ("kappa0_shape", "kappa0_rate", "psi0_shape", "psi0_rate")
SUPPORT_PRIORS = ("kappa_dof_support", "psi_dof_support")
SBM_KEYS = {"eta", "pi1", "pi3", "gamma", "delta"}
PRIOR_KEYS = set(PER_COMPONENT) | set(SCALAR_PRIORS) | set(SUPPORT_PRIORS) | {"sbm"}

DEFAULT_OUTPUT = {"directory": "gpmtd_run", "store_f": True, "grid": {"n_points": 201, "padding": 0.1}}


def load_config(path) -> dict:
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw.setdefault("_base_dir", str(p.resolve().parent))
    return raw


def _check_keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError("expected a mapping", where)
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", where)


def _resolve_path(value, base_dir) -> str:
    p = Path(value)
    if not p.is_absolute() and base_dir:
        p = Path(base_dir) / p
    return str(p.resolve())


def validate(raw: dict) -> dict:
    """Check the schema and normalize paths; does not touch the data."""
    cfg = {k: v for k, v in raw.items() if k != "_base_dir"}
    base = raw.get("_base_dir")
    _check_keys(cfg, SECTIONS, "<root>")
    if "data" not in cfg or "path" not in (cfg.get("data") or {}):
        raise ConfigError("missing required key", "data.path")
    data = dict(cfg["data"])
    _check_keys(data, DATA_KEYS, "data")
    data["path"] = _resolve_path(data["path"], base)
    data.setdefault("column", None)
    data.setdefault("header", True)
    data.setdefault("log", False)
    for key in ("header", "log"):
        if not isinstance(data[key], bool):
            raise ConfigError("must be true or false", f"data.{key}")

    model = dict(cfg.get("model") or {})
    _check_keys(model, MODEL_KEYS, "model")
    lags = model.get("lags", 5)
    if not isinstance(lags, int) or isinstance(lags, bool) or lags < 1:
        raise ConfigError("must be a positive integer", "model.lags")
    model["lags"] = lags
    try:
        model["smoothness"] = float(model.get("smoothness", 2.5))
    except (TypeError, ValueError) as exc:
        raise ConfigError("must be 2.5 or inf", "model.smoothness") from exc
    if model["smoothness"] not in (2.5, float("inf")):
        raise ConfigError("must be 2.5 or inf", "model.smoothness")
    priors = dict(model.get("priors") or {})
    _check_keys(priors, PRIOR_KEYS, "model.priors")
    if "sbm" in priors:
        _check_keys(priors["sbm"], SBM_KEYS, "model.priors.sbm")
    model["priors"] = priors

    mcmc = dict(cfg.get("mcmc") or {})
    _check_keys(mcmc, MCMC_KEYS, "mcmc")
    output = dict(DEFAULT_OUTPUT)
    output.update(cfg.get("output") or {})
    _check_keys(output, OUTPUT_KEYS, "output")
    grid = dict(DEFAULT_OUTPUT["grid"])
    grid.update(output.get("grid") or {})
    _check_keys(grid, GRID_KEYS, "output.grid")
    output["grid"] = grid
    output["directory"] = _resolve_path(output["directory"], base)
    try:
        mcmc_cfg = McmcConfig(store_f=bool(output["store_f"]), **mcmc)
    except (TypeError, GpmtdError) as exc:
        raise ConfigError(str(exc), "mcmc") from exc
    out = {"data": data, "model": model, "mcmc": mcmc_cfg.to_dict(), "output": output}
    out["mcmc"].pop("store_f")
    if "manifest" in cfg:
        out["manifest"] = cfg["manifest"]
    return out


def _broadcast(value, n: int, key: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.size != n:
        raise ConfigError(f"expected a scalar or {n} values, got {arr.size}", f"model.priors.{key}")
    return arr


def build_hyperparameters(cfg: dict, data: TimeSeriesData) -> Hyperparameters:
    model = cfg["model"]
    hyper = default_hyperparameters(data, smoothness=model["smoothness"])
    pri = model["priors"]
    L = data.n_lags
    kw = {}
    for key in PER_COMPONENT:
        kw[key] = _broadcast(pri[key], L + 1, key) if key in pri else getattr(hyper, key)
    for key in SUPPORT_PRIORS:
        kw[key] = tuple(float(v) for v in pri.get(key, getattr(hyper, key)))
    for key in SCALAR_PRIORS:
        kw[key] = float(pri.get(key, getattr(hyper, key)))
    sbm_over = dict(pri.get("sbm") or {})
    for key in ("gamma", "delta"):
        if key in sbm_over:
            sbm_over[key] = tuple(_broadcast(sbm_over[key], L, f"sbm.{key}"))
    try:
        kw["sbm"] = SbmParams.default(L, **sbm_over)
        return Hyperparameters(smoothness=model["smoothness"], **kw)
    except GpmtdError as exc:
        raise ConfigError(str(exc), "model.priors") from exc


def materialize(cfg: dict, hyper: Hyperparameters) -> dict:
    """Config with every prior entry written out explicitly."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in cfg.items() if k != "manifest"}
    out["model"] = dict(cfg["model"])
    out["model"]["priors"] = {
        **{k: [float(v) for v in getattr(hyper, k)] for k in PER_COMPONENT},
        **{k: [float(v) for v in getattr(hyper, k)] for k in SUPPORT_PRIORS},
        **{k: float(getattr(hyper, k)) for k in SCALAR_PRIORS},
        "sbm": {"eta": float(hyper.sbm.eta), "pi1": float(hyper.sbm.pi1), "pi3": float(hyper.sbm.pi3),
                "gamma": list(hyper.sbm.gamma), "delta": list(hyper.sbm.delta)},
    }
    return out


def write_manifest(path, resolved: dict, extra: dict) -> None:
    doc = dict(resolved)
    doc["manifest"] = {"version": __version__, **extra}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_manifest(run_path) -> tuple[dict, Path]:
    p = Path(run_path)
    if p.is_dir():
        p = p / "manifest.yaml"
    if not p.exists():
        raise ConfigError(f"no manifest at {p}")
    return yaml.safe_load(p.read_text()), p.parent
