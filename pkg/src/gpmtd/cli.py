"""Command-line front end: ``gpmtd simulate|fit|summarize|density|mean|forecast``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import inference, io
from .errors import ConfigError, DataError, GpmtdError
from .model import build_design
from .sampler import McmcConfig, run_chain
from .simulators import KINDS, SimSpec, simulate_predator_prey, simulate_ricker_lag2
from .streams import RandomStream

log = logging.getLogger("gpmtd")

WORKERS_ENV = "GPMTD_WORKERS"


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    spec = SimSpec(kind=args.kind, length=args.length, burn_in=args.burn_in, noise_sd=args.noise_sd,
                   r=args.r, a=args.a, b=args.b,
                   initial=tuple(args.initial) if args.initial else None, seed=args.seed)
    stream = RandomStream(spec.seed)
    if spec.kind == "ricker_lag2":
        y = simulate_ricker_lag2(spec, stream)
        if args.log:
            y = np.log(y)
    else:
        y, _, logy = simulate_predator_prey(spec, stream)
        if args.log:
            y = logy
    io.write_series(args.out, y)
    log.info("wrote %d values to %s", y.size, args.out)
    return 0


# ---------------------------------------------------------------------------
# fit


def _chain_job(payload):
    data, hyper, mcmc, chain = payload
    return run_chain(data, hyper, mcmc, chain_id=chain)


def _workers(n_chains: int) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, min(int(env), n_chains))
    return max(1, min(os.cpu_count() or 1, n_chains))


def fit_from_config(raw: dict, out_dir: str | None = None) -> Path:
    cfg = cfgmod.validate(raw)
    if out_dir is not None:
        cfg["output"]["directory"] = str(Path(out_dir).resolve())
    d = cfg["data"]
    y = io.read_series(d["path"], d["column"], d["header"], d["log"])
    data = build_design(y, cfg["model"]["lags"])
    checksum = io.file_checksum(d["path"])
    old = cfg.get("manifest") or {}
    if old.get("data_sha256") and old["data_sha256"] != checksum:
        log.warning("data file checksum differs from the manifest being re-run")
    hyper = cfgmod.build_hyperparameters(cfg, data)
    resolved = cfgmod.materialize(cfg, hyper)
    mcmc = McmcConfig(store_f=bool(cfg["output"]["store_f"]), **cfg["mcmc"])

    out = Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(data, hyper, mcmc, c) for c in range(mcmc.n_chains)]
    n_workers = _workers(mcmc.n_chains)
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            stores = list(pool.map(_chain_job, jobs))
    else:
        stores = [_chain_job(j) for j in jobs]

    files = []
    for c, store in enumerate(stores):
        rec_name = f"chain_{c}.jsonl"
        io.write_records(out / rec_name, store.records)
        entry = {"chain": c, "records": rec_name, "n_samples": len(store),
                 "acceptance": [None if np.isnan(a) else float(a) for a in store.acceptance.get(c, [])]}
        if store.f is not None:
            f_name = f"chain_{c}_f.csv"
            io.write_f(out / f_name, store)
            entry["f"] = f_name
        files.append(entry)
    cfgmod.write_manifest(out / "manifest.yaml", resolved,
                          {"seed": mcmc.seed, "data_sha256": checksum, "n_obs": int(y.size),
                           "chains": files})
    return out


def cmd_fit(args) -> int:
    raw = cfgmod.load_config(args.config)
    if args.seed is not None:
        raw.setdefault("mcmc", {})["seed"] = args.seed
    if args.chains is not None:
        raw.setdefault("mcmc", {})["n_chains"] = args.chains
    data = raw.setdefault("data", {})
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", "data")
    if args.data is not None:
        data["path"] = str(Path(args.data).resolve())
    if args.no_header:
        data["header"] = False
    if args.log:
        data["log"] = True
    out = fit_from_config(raw, args.out)
    log.info("samples and manifest written to %s", out)
    return 0


# ---------------------------------------------------------------------------
# loading fitted runs


class FittedRun:
    def __init__(self, path, chains=None, need_f: bool = False):
        p = Path(path)
        if p.is_file() and p.suffix == ".jsonl":
            self.manifest, self.dir = None, p.parent
            f_path = p.with_name(p.stem + "_f.csv")
            self.store = io.load_store([p], [f_path])
        else:
            self.manifest, self.dir = cfgmod.load_manifest(p)
            entries = self.manifest["manifest"]["chains"]
            recs = [self.dir / e["records"] for e in entries]
            fs = [self.dir / e["f"] if "f" in e else None for e in entries]
            self.store = io.load_store(recs, fs)
        if chains:
            self.store = self.store.filter_chains(chains)
            if not len(self.store):
                raise DataError(f"no records for chains {chains}")
        if need_f and not self.store.has_f:
            raise DataError("fitted run has no stored GP realizations (output.store_f was false)")

    def data(self, data_path=None):
        if self.manifest is None and data_path is None:
            raise ConfigError("a data file is required when reading a bare record file (--data)")
        d = dict(self.manifest["data"]) if self.manifest else {"column": None, "header": True, "log": False}
        if data_path is not None:
            d["path"] = data_path
        y = io.read_series(d["path"], d.get("column"), d.get("header", True), d.get("log", False))
        return build_design(y, self.store.n_lags)

    @property
    def smoothness(self) -> float:
        return float(self.manifest["model"]["smoothness"]) if self.manifest else 2.5


def cmd_summarize(args) -> int:
    run = FittedRun(args.samples, args.chain)
    rows = inference.summarize_posterior(run.store)
    cols = ["parameter", "mean", "q2.5", "q97.5"]
    if args.out:
        io.write_table(args.out, rows, cols)
    else:
        io.write_table(sys.stdout, rows, cols)
    return 0


def _parse_lag_values(items) -> dict:
    out = {}
    for item in items or []:
        try:
            lag, value = item.split("=", 1)
            out[int(lag)] = float(value)
        except ValueError as exc:
            raise ConfigError(f"expected LAG=VALUE, got {item!r}", "--lag") from exc
    return out


def _context(run, data, args):
    active = inference.active_lags(run.store, args.threshold)
    return inference.make_context(data, _parse_lag_values(args.lag), active=active, fill=args.fill,
                                  fill_value=args.fill_value)


def _axis(data, lo, hi, n):
    base = inference.default_grid(data, n)
    lo = base[0] if lo is None else lo
    hi = base[-1] if hi is None else hi
    return np.linspace(lo, hi, n)


def cmd_density(args) -> int:
    run = FittedRun(args.samples, args.chain, need_f=True)
    data = run.data(args.data)
    ctx = _context(run, data, args)
    grid = _axis(data, args.grid_min, args.grid_max, args.grid_n)
    res = inference.density_grid(run.store, data, ctx, grid, run.smoothness, RandomStream(args.seed))
    rows = [{"y": g, "mean": m, "q2.5": lo, "q97.5": hi}
            for g, m, lo, hi in zip(res.grid, res.mean, res.lower, res.upper)]
    _emit(args.out, rows, ["y", "mean", "q2.5", "q97.5"])
    return 0


def cmd_mean(args) -> int:
    run = FittedRun(args.samples, args.chain, need_f=True)
    data = run.data(args.data)
    ctx = _context(run, data, args)
    x = _axis(data, args.x_min, args.x_max, args.x_n)
    res = inference.mean_curve(run.store, data, ctx, args.vary, x, run.smoothness, RandomStream(args.seed))
    rows = [{"x": g, "mean": m, "q2.5": lo, "q97.5": hi}
            for g, m, lo, hi in zip(res.x, res.mean, res.lower, res.upper)]
    _emit(args.out, rows, ["x", "mean", "q2.5", "q97.5"])
    return 0


def cmd_forecast(args) -> int:
    run = FittedRun(args.samples, args.chain, need_f=True)
    data = run.data(args.data)
    store = run.store
    if args.max_samples is not None and args.max_samples < len(store):
        idx = np.linspace(0, len(store) - 1, args.max_samples).round().astype(int)
        store = store.subset(idx)
    root = RandomStream(args.seed)
    rows = []
    for i, state in enumerate(store.states()):
        for p in range(args.paths):
            ys, zs = inference.k_step_forecast(state, data, args.steps, run.smoothness, root.child(i, p))
            for k, (yv, zv) in enumerate(zip(ys, zs), start=1):
                rows.append({"sample": i, "path": p, "step": k, "y": float(yv), "z": int(zv)})
    _emit(args.out, rows, ["sample", "path", "step", "y", "z"])
    return 0


def _emit(out, rows, cols):
    if out:
        io.write_table(out, rows, cols)
    else:
        io.write_table(sys.stdout, rows, cols)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpmtd", description="GP mixture transition distribution models")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a reference series")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--length", "-T", type=int, default=105)
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--noise-sd", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--a", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--initial", type=float, nargs=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--log", action="store_true", help="emit the natural log of the series")
    s.add_argument("--out", "-o", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run MCMC chains from a config file")
    f.add_argument("config")
    f.add_argument("--out", "-o", help="override output.directory")
    f.add_argument("--seed", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--data", help="override data.path")
    f.add_argument("--no-header", action="store_true", help="data file has no header row")
    f.add_argument("--log", action="store_true", help="fit the natural log of the series")
    f.set_defaults(func=cmd_fit)

    def common(p, need_context=True):
        p.add_argument("samples", help="run directory, manifest, or chain record file")
        p.add_argument("--chain", type=int, action="append", help="restrict to chain(s)")
        p.add_argument("--out", "-o")
        if need_context:
            p.add_argument("--data", help="data file (needed for bare record files)")
            p.add_argument("--lag", action="append", metavar="LAG=VALUE", help="fix a lag value")
            p.add_argument("--fill", choices=inference.FILL_POLICIES, default="mean")
            p.add_argument("--fill-value", type=float)
            p.add_argument("--threshold", type=float, default=inference.DEFAULT_THRESHOLD)
            p.add_argument("--seed", type=int, default=0)

    m = sub.add_parser("summarize", help="posterior means and 95%% intervals")
    common(m, need_context=False)
    m.set_defaults(func=cmd_summarize)

    d = sub.add_parser("density", help="transition density on a grid")
    common(d)
    d.add_argument("--grid-min", type=float)
    d.add_argument("--grid-max", type=float)
    d.add_argument("--grid-n", type=int, default=201)
    d.set_defaults(func=cmd_density)

    mn = sub.add_parser("mean", help="transition mean as one lag varies")
    common(mn)
    mn.add_argument("--vary", type=int, required=True, help="lag to sweep")
    mn.add_argument("--x-min", type=float)
    mn.add_argument("--x-max", type=float)
    mn.add_argument("--x-n", type=int, default=101)
    mn.set_defaults(func=cmd_mean)

    fc = sub.add_parser("forecast", help="simulate K-step-ahead paths")
    fc.add_argument("samples")
    fc.add_argument("--chain", type=int, action="append")
    fc.add_argument("--data")
    fc.add_argument("--steps", "-K", type=int, default=1)
    fc.add_argument("--paths", type=int, default=1)
    fc.add_argument("--max-samples", type=int)
    fc.add_argument("--seed", type=int, default=0)
    fc.add_argument("--out", "-o")
    fc.set_defaults(func=cmd_forecast)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GpmtdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
