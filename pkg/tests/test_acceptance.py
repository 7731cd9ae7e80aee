"""Acceptance criteria 1-7.

Each criterion records one PASS / FAIL / SKIP line; the lines are printed in
the pytest terminal summary and when this file is run as a script.

Data for criteria 2 and 3 are not bundled:

* ``GPMTD_PINK_SALMON``: one-column file of the 30 annual pink salmon
  escapement counts for 1934-1963 (set ``GPMTD_PINK_SALMON_LOGGED=1`` if the
  file already holds logarithms).
* ``GPMTD_OLD_FAITHFUL``: one-column file of the 299 geyser waiting times.
  Without it the optional ``pydataset`` package is tried (``geyser`` data).
"""

from __future__ import annotations

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
import yaml
from scipy import stats
from scipy.integrate import trapezoid

from gpmtd import io
from gpmtd.cli import main as cli_main
from gpmtd.covariance import CorrelationSpec, correlation_matrix, distance_matrix, extend_inverse
from gpmtd.inference import covering_grid, lag_means, transition_density, transition_mean
from gpmtd.model import Hyperparameters, ModelState, build_design, default_hyperparameters
from gpmtd.sampler import (GibbsSampler, McmcConfig, active_f_conditional, collapsed_component_loglik,
                           component_summary, run_chain)
from gpmtd.sbm import SbmParams, posterior_update, theta_from_weights
from gpmtd.simulators import SimSpec, simulate_predator_prey, simulate_ricker_lag2
from gpmtd.streams import RandomStream

RESULTS: dict[int, tuple[str, str]] = {}
TITLES = {
    1: "single-lag recovery (Ricker lag 2)",
    2: "pink salmon lag 2",
    3: "Old Faithful lag 1 plus intercept",
    4: "time-delay embedding, short series",
    5: "oracle equivalence suite",
    6: "getting-it-right joint distribution test",
    7: "density validity on the criterion-1 fit",
}


def record(n: int, ok: bool | None, detail: str) -> None:
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    RESULTS[n] = (status, detail)
    print(report_line(n))


def report_line(n: int) -> str:
    status, detail = RESULTS[n]
    return f"criterion {n} [{status}] {TITLES[n]}: {detail}"


def report_lines() -> list[str]:
    return [report_line(n) for n in sorted(RESULTS)]


def chain_columns(store, name, n_chains):
    return [np.array([r[name] for r in store.records if r["chain"] == c]) for c in range(n_chains)]


def fit_chains(y, L, seed, n_chains=3):
    data = build_design(y, L)
    hyper = default_hyperparameters(data)
    cfg = McmcConfig(seed=seed, n_chains=n_chains)
    return data, [run_chain(data, hyper, cfg, chain_id=c) for c in range(n_chains)]


# ---------------------------------------------------------------------------
# criterion 1 and 7 share a CLI fit with the default configuration


@pytest.fixture(scope="module")
def ricker_fit(tmp_path_factory):
    root = tmp_path_factory.mktemp("crit1")
    assert cli_main(["simulate", "ricker_lag2", "--length", "105", "--seed", "1",
                     "-o", str(root / "ricker.csv")]) == 0
    cfg = {"data": {"path": str(root / "ricker.csv")}, "model": {"lags": 5},
           "mcmc": {"seed": 1}, "output": {"directory": str(root / "run")}}
    (root / "fit.yaml").write_text(yaml.safe_dump(cfg))
    t0 = time.time()
    assert cli_main(["fit", str(root / "fit.yaml")]) == 0
    elapsed = time.time() - t0
    man, _ = yaml.safe_load((root / "run" / "manifest.yaml").read_text()), None
    files = [root / "run" / e["records"] for e in man["manifest"]["chains"]]
    f_files = [root / "run" / e["f"] for e in man["manifest"]["chains"]]
    store = io.load_store(files, f_files)
    data = build_design(io.read_series(root / "ricker.csv"), 5)
    return store, data, elapsed


def test_criterion_1_ricker_lag_two(ricker_fit):
    store, _, elapsed = ricker_fit
    per_chain = [len([r for r in store.records if r["chain"] == c]) for c in range(3)]
    q = [float(np.quantile(v, 0.025)) for v in chain_columns(store, "lambda_2", 3)]
    passing = sum(v > 0.99 for v in q)
    ok = passing >= 2 and per_chain == [2000, 2000, 2000]
    record(1, ok, f"q2.5(lambda_2) per chain {np.round(q, 4).tolist()} ({passing}/3 > 0.99); "
                  f"records {per_chain}; {elapsed / 3:.0f} s per chain")
    assert ok


# ---------------------------------------------------------------------------


def _salmon_series():
    path = os.environ.get("GPMTD_PINK_SALMON")
    if not path:
        return None
    logged = os.environ.get("GPMTD_PINK_SALMON_LOGGED", "") not in ("", "0")
    return io.read_series(path, log=not logged)


def test_criterion_2_pink_salmon():
    y = _salmon_series()
    if y is None:
        record(2, None, "set GPMTD_PINK_SALMON to the escapement series to run")
        pytest.skip("pink salmon data not supplied")
    t0 = time.time()
    _, chains = fit_chains(y, 5, seed=2)
    lam2 = np.concatenate([s.column("lambda_2") for s in chains])
    mean, lo = float(lam2.mean()), float(np.quantile(lam2, 0.025))
    ok = abs(mean - 0.975) <= 0.10 and lo < 0.975
    record(2, ok, f"mean(lambda_2) {mean:.3f}, q2.5 {lo:.3f}; {time.time() - t0:.0f} s")
    assert ok


# ---------------------------------------------------------------------------


def _geyser_series():
    path = os.environ.get("GPMTD_OLD_FAITHFUL")
    if path:
        return io.read_series(path)
    try:
        from pydataset import data as pyd
    except ImportError:
        return None
    return pyd("geyser")["waiting"].to_numpy(dtype=float)


def test_criterion_3_old_faithful():
    y = _geyser_series()
    if y is None:
        record(3, None, "set GPMTD_OLD_FAITHFUL or install pydataset to run")
        pytest.skip("Old Faithful data not available")
    assert y.size == 299
    t0 = time.time()
    _, chains = fit_chains(y, 10, seed=3)
    elapsed = time.time() - t0
    rows = []
    for s in chains:
        l0, l1 = s.column("lambda_0").mean(), s.column("lambda_1").mean()
        good = abs(l0 - 0.428) <= 0.08 and abs(l1 - 0.571) <= 0.08 and l0 + l1 > 0.99
        rows.append((round(float(l0), 3), round(float(l1), 3), good))
    n_good = sum(r[2] for r in rows)
    ok = n_good >= 2
    record(3, ok, f"per-chain (lambda_0, lambda_1) {[(a, b) for a, b, _ in rows]}; "
                  f"{n_good}/3 chains within tolerance; {elapsed / 60:.1f} min")
    assert ok


# ---------------------------------------------------------------------------


def test_criterion_4_time_delay_embedding():
    _, _, logy = simulate_predator_prey(SimSpec(kind="predator_prey", length=105, seed=4))
    t0 = time.time()
    _, chains = fit_chains(logy, 5, seed=4)
    q = [float(np.quantile(s.column("lambda_1"), 0.025)) for s in chains]
    sd = [float(np.sqrt(s.column("sigma2_1")).mean()) for s in chains]
    good = [qq > 0.99 and 0.25 < ss < 0.6 for qq, ss in zip(q, sd)]
    ok = sum(good) >= 2
    record(4, ok, f"q2.5(lambda_1) {np.round(q, 4).tolist()}, sd_1 {np.round(sd, 3).tolist()}; "
                  f"{sum(good)}/3 chains; {time.time() - t0:.0f} s")
    assert ok


# ---------------------------------------------------------------------------


def _crit5_collapsed(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        x, y = rng.uniform(-2, 2, n), rng.normal(size=n)
        m0, v0, s2 = rng.normal(), rng.uniform(0.5, 3), rng.uniform(0.2, 2)
        d = distance_matrix(x)
        vals, refs = [], []
        for kappa, psi in [(rng.uniform(0.1, 20), rng.uniform(0.1, 5)) for _ in range(2)]:
            summ = component_summary(y, d, kappa, psi, 2.5)
            vals.append(collapsed_component_loglik(summ, m0, v0, s2))
            cov = s2 * (kappa * summ.corr + np.eye(n)) + v0
            refs.append(stats.multivariate_normal(np.full(n, m0), cov).logpdf(y))
        worst = max(worst, abs((vals[0] - vals[1]) - (refs[0] - refs[1])))
    return worst


def _crit5_sigma(rng):
    worst = 0.0
    for n in range(1, 21):
        x, y = rng.uniform(0, 4, n), rng.normal(size=n)
        kappa, s2 = rng.uniform(0.5, 20), rng.uniform(0.2, 2)
        summ = component_summary(y, distance_matrix(x), kappa, rng.uniform(0.2, 2), 2.5)
        _, sigma = active_f_conditional(summ, 0.1, s2)
        direct = s2 * np.linalg.inv(np.linalg.inv(kappa * summ.corr) + np.eye(n))
        worst = max(worst, float(np.max(np.abs(sigma - direct))))
    return worst


def _crit5_extend(rng):
    x = np.sort(rng.uniform(0, 10, 21))
    a = 1.5 * correlation_matrix(x, CorrelationSpec(2.5, 0.7), jitter=1e-2)
    inv, worst = np.array([[1.0 / a[0, 0]]]), 0.0
    for k in range(1, 21):
        inv = extend_inverse(inv, a[:k, k], a[k, k])
        worst = max(worst, float(np.max(np.abs(inv - np.linalg.inv(a[:k + 1, :k + 1])))))
    return worst


def _crit5_sbm_tv():
    params = SbmParams.default(2, eta=10.0, pi1=0.3, pi3=0.3)
    counts = np.array([1, 1, 1])
    m = 600
    g = (np.arange(m) + 0.5) / m
    t0, t1 = np.meshgrid(g, g, indexing="ij")
    prior = np.ones_like(t0)
    for t, j in ((t0, 0), (t1, 1)):
        prior = prior * (0.3 * stats.beta.pdf(t, 1, 10) + 0.4 * stats.beta.pdf(t, 1, 1) + 0.3 * stats.beta.pdf(t, 10, 1))
    post = prior * t0 * (1 - t0) ** 2 * t1 * (1 - t1)
    post /= post.sum()
    nb = 6
    cell = (np.arange(m) * nb) // m
    oracle = np.zeros((nb, nb))
    np.add.at(oracle, (cell[:, None].repeat(m, 1), cell[None, :].repeat(m, 0)), post)
    s = RandomStream(55)
    th = np.array([theta_from_weights(posterior_update(params, counts, s.child(i))) for i in range(100_000)])
    emp, _, _ = np.histogram2d(th[:, 0], th[:, 1], bins=nb, range=[[0, 1], [0, 1]])
    return 0.5 * float(np.abs(emp / emp.sum() - oracle).sum())


def test_criterion_5_oracle_suite():
    rng = np.random.default_rng(5)
    t0 = time.time()
    a, b, c, d = _crit5_collapsed(rng), _crit5_sigma(rng), _crit5_extend(rng), _crit5_sbm_tv()
    ok = a < 1e-10 and b < 1e-10 and c < 1e-8 and d < 0.02
    record(5, ok, f"(a) {a:.1e} (b) {b:.1e} (c) {c:.1e} (d) TV {d:.4f}; {time.time() - t0:.0f} s")
    assert ok


# ---------------------------------------------------------------------------
# getting it right


GIR_T, GIR_L = 12, 2


def gir_hyper() -> Hyperparameters:
    L = GIR_L
    ones = np.ones(L + 1)
    return Hyperparameters(
        level_mean=0 * ones, level_var=ones, sigma_dof=10 * ones, sigma_scale=ones,
        kappa_dof_support=(5.0, 10.0), psi_dof_support=(5.0, 10.0),
        kappa0_shape=10.0, kappa0_rate=2.5, psi0_shape=10.0, psi0_rate=10.0,
        sbm=SbmParams.default(L, eta=5.0), smoothness=2.5)


def gir_prior_state(h: Hyperparameters, X: np.ndarray, rng) -> ModelState:
    """Direct draw of every parameter from the prior (independent of the sampler)."""
    L, n = X.shape[1], X.shape[0]
    inv_chi2 = lambda dof, hm: (dof * hm / 2) / rng.standard_gamma(dof / 2)
    nu_k = float(rng.choice(h.kappa_dof_support))
    nu_p = float(rng.choice(h.psi_dof_support))
    k0 = rng.standard_gamma(h.kappa0_shape) / h.kappa0_rate
    p0 = rng.standard_gamma(h.psi0_shape) / h.psi0_rate
    kappa = np.array([inv_chi2(nu_k, k0) for _ in range(L)])
    psi = np.array([inv_chi2(nu_p, p0) for _ in range(L)])
    mu = rng.normal(h.level_mean, np.sqrt(h.level_var))
    sigma2 = np.array([inv_chi2(h.sigma_dof[j], h.sigma_scale[j]) for j in range(L + 1)])
    f = np.empty((L, n))
    for k in range(L):
        r = correlation_matrix(X[:, k], CorrelationSpec(h.smoothness, psi[k]), jitter=1e-8)
        f[k] = np.linalg.cholesky(kappa[k] * sigma2[k + 1] * r) @ rng.standard_normal(n)
    a, b = h.sbm.beta_shapes()
    theta = np.empty(L)
    for j in range(L):
        comp = rng.choice(3, p=h.sbm.mixture_weights())
        theta[j] = rng.beta(a[j, comp], b[j, comp])
    lam = np.append(theta * np.concatenate([[1.0], np.cumprod(1 - theta)[:-1]]), np.prod(1 - theta))
    z = rng.choice(L + 1, size=n, p=lam / lam.sum())
    return ModelState(z=z, weights=lam, mu=mu, sigma2=sigma2, f=f, kappa=kappa, psi=psi,
                      nu_kappa=nu_k, kappa0=k0, nu_psi=nu_p, psi0=p0)


def gir_response(state: ModelState, rng) -> np.ndarray:
    n = state.z.size
    mean = np.where(state.z == 0, state.mu[0],
                    state.mu[state.z] + state.f[np.maximum(state.z, 1) - 1, np.arange(n)])
    return mean + np.sqrt(state.sigma2[state.z]) * rng.standard_normal(n)


def gir_stats(state: ModelState, y: np.ndarray) -> np.ndarray:
    return np.concatenate([
        state.weights, state.mu, np.log(state.sigma2), np.log(state.kappa), np.log(state.psi),
        [math.log(state.kappa0), math.log(state.psi0), state.nu_kappa, state.nu_psi,
         np.mean(state.z == 0), y.mean(), state.f[0].mean()],
    ])


GIR_NAMES = (["lambda_0", "lambda_1", "lambda_2", "mu_0", "mu_1", "mu_2", "log_sigma2_0", "log_sigma2_1",
              "log_sigma2_2", "log_kappa_1", "log_kappa_2", "log_psi_1", "log_psi_2", "log_kappa0", "log_psi0",
              "nu_kappa", "nu_psi", "share_z0", "mean_y", "mean_f1"])


def batch_se(x: np.ndarray, n_batches: int = 100) -> np.ndarray:
    b = x[: (x.shape[0] // n_batches) * n_batches].reshape(n_batches, -1, x.shape[1]).mean(axis=1)
    return b.std(axis=0, ddof=1) / math.sqrt(n_batches)


def test_criterion_6_getting_it_right():
    t0 = time.time()
    h = gir_hyper()
    rng = np.random.default_rng(6)
    base = build_design(rng.normal(size=GIR_T), GIR_L)   # fixed design
    n_iter = 200_000

    prior = np.empty((n_iter // 2, len(GIR_NAMES)))
    for i in range(prior.shape[0]):
        s = gir_prior_state(h, base.X, rng)
        prior[i] = gir_stats(s, gir_response(s, rng))

    state = gir_prior_state(h, base.X, rng)
    y = gir_response(state, rng)
    g = GibbsSampler(base.with_response(y), h, state=state, seed=6)
    chain = np.empty((n_iter, len(GIR_NAMES)))
    for i in range(n_iter):
        g.step()
        y = gir_response(g.state, rng)
        g.data = base.with_response(y)
        chain[i] = gir_stats(g.state, y)

    se_prior = prior.std(axis=0, ddof=1) / math.sqrt(prior.shape[0])
    se_chain = batch_se(chain)
    z = (chain.mean(axis=0) - prior.mean(axis=0)) / np.sqrt(se_prior ** 2 + se_chain ** 2)
    worst = int(np.argmax(np.abs(z)))
    ok = bool(np.all(np.abs(z) < 4))
    record(6, ok, f"max |z| {abs(z[worst]):.2f} ({GIR_NAMES[worst]}) over {len(z)} statistics; "
                  f"{time.time() - t0:.0f} s")
    print("  z-scores:", dict(zip(GIR_NAMES, np.round(z, 2).tolist())))
    assert ok


# ---------------------------------------------------------------------------


def test_criterion_7_density_validity(ricker_fit):
    store, data, _ = ricker_fit
    rng = np.random.default_rng(7)
    idx = rng.choice(len(store), size=50, replace=False)
    lo, hi = data.y.min(), data.y.max()
    worst_mass = worst_mean = 0.0
    for i in idx:
        state = store.state(int(i))
        for _ in range(5):
            ctx = rng.uniform(lo, hi, data.n_lags)
            means = lag_means(state, data, ctx, 2.5)
            grid = covering_grid(state.weights, means, state.sigma2)
            dens = transition_density(state, data, ctx, grid, 2.5)
            assert np.all(dens >= 0)
            worst_mass = max(worst_mass, abs(trapezoid(dens, grid) - 1.0))
            worst_mean = max(worst_mean, abs(trapezoid(grid * dens, grid) - transition_mean(state, data, ctx, 2.5)))
    ok = worst_mass < 1e-2 and worst_mean < 1e-3
    record(7, ok, f"max |mass - 1| {worst_mass:.1e}, max |mean error| {worst_mean:.1e} over 250 cases")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
