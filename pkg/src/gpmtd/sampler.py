"""Gibbs sampler for the GP mixture transition distribution model.

One iteration performs, in order:

1. allocations ``z_t`` from their discrete full conditionals;
2. weights from the SBM-multinomial conditional;
3. intercept level ``mu_0`` and 4. variance ``sigma2_0``;
5. for each occupied lag component the collapsed scan
   ``(kappa, psi) -> mu -> sigma2 -> f[active] -> f[inactive]``;
6. dof parameters ``nu_kappa``, ``nu_psi`` and 7. harmonic means
   ``kappa0``, ``psi0`` from the occupied components.

Unoccupied lag components are refreshed from their prior *after* steps 6-7,
so that the pair (hyperparameters, unoccupied parameters) is drawn jointly
from its conditional.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from . import sbm
from .covariance import DEFAULT_JITTER, CorrelationSpec, DistanceTable, correlation_from_distances
from .errors import ChainAbort, InvalidParameterError, NumericError
from .model import (Hyperparameters, ModelState, TimeSeriesData, component_log_weights,
                    init_default_state, log_likelihood)
from .streams import (RandomStream, cholesky_jittered, draw_categorical, draw_categorical_logits,
                      draw_gamma, draw_inverse_gamma, draw_inverse_gamma_scaled,
                      draw_mvn_from_factor, draw_normal)

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

# substream slots within one iteration
SLOT_Z, SLOT_WEIGHTS, SLOT_INTERCEPT, SLOT_HYPERS, SLOT_COMPONENT = 0, 1, 2, 3, 4

THREADS_ENV = "GPMTD_NUM_THREADS"


@dataclass
class McmcConfig:
    n_adapt: int = 1000
    n_burn: int = 5000
    n_keep: int = 2000
    thin: int = 5
    target_acceptance: float = 0.30
    initial_proposal_sd: float = 0.5
    n_chains: int = 3
    seed: int = 0
    store_f: bool = True
    n_threads: int = 1

    def __post_init__(self):
        for name in ("n_adapt", "n_burn", "n_keep"):
            if int(getattr(self, name)) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")
        if self.thin < 1:
            raise InvalidParameterError("thin must be at least 1")
        if not 0 < self.target_acceptance < 1:
            raise InvalidParameterError("target_acceptance must lie in (0, 1)")
        if not self.initial_proposal_sd > 0:
            raise InvalidParameterError("initial_proposal_sd must be positive")
        if self.n_chains < 1:
            raise InvalidParameterError("n_chains must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# densities


def log_inverse_gamma_pdf(x, shape, scale):
    return shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x


def log_inverse_gamma_scaled_pdf(x, dof, harmonic_mean):
    return log_inverse_gamma_pdf(x, 0.5 * dof, 0.5 * dof * harmonic_mean)


# ---------------------------------------------------------------------------
# step 1


def allocation_log_probs(state: ModelState, data: TimeSeriesData) -> np.ndarray:
    """Row-normalized log allocation probabilities, shape ``(n_obs, L+1)``."""
    lw = component_log_weights(state, data.response)
    top = lw.max(axis=1, keepdims=True)
    return lw - (top + np.log(np.exp(lw - top).sum(axis=1, keepdims=True)))


def update_allocations(state: ModelState, data: TimeSeriesData, stream: RandomStream):
    lw = component_log_weights(state, data.response)
    z = draw_categorical_logits(stream, lw).astype(np.int64)
    return z, np.bincount(z, minlength=state.n_lags + 1)


# ---------------------------------------------------------------------------
# step 2


def update_weights(hyper: Hyperparameters, counts, stream: RandomStream) -> np.ndarray:
    return sbm.posterior_update(hyper.sbm, counts, stream)


# ---------------------------------------------------------------------------
# steps 3-4


def intercept_level_conditional(y0: np.ndarray, sigma2: float, m0: float, v0: float):
    """``(m1, v1)`` of the Gaussian full conditional for the intercept level."""
    v1 = 1.0 / (1.0 / v0 + y0.size / sigma2)
    m1 = v1 * (m0 / v0 + y0.sum() / sigma2)
    return m1, v1


def update_intercept(state: ModelState, data: TimeSeriesData, hyper: Hyperparameters,
                     stream: RandomStream):
    y0 = data.response[state.z == 0]
    m1, v1 = intercept_level_conditional(y0, state.sigma2[0], hyper.level_mean[0], hyper.level_var[0])
    mu0 = draw_normal(stream, m1, v1)
    dof, s0 = hyper.sigma_dof[0], hyper.sigma_scale[0]
    shape = 0.5 * (dof + y0.size)
    scale = 0.5 * (dof * s0 + np.sum((y0 - mu0) ** 2))
    return mu0, draw_inverse_gamma(stream, shape, scale)


# ---------------------------------------------------------------------------
# step 5: one lag component


@dataclass
class ComponentSummary:
    """Quantities of one lag component at a given ``(kappa, psi)`` with the
    GP realization and level integrated out."""

    n: int
    y: np.ndarray            # active responses
    corr: np.ndarray         # jittered R^ii
    chol_w: np.ndarray       # lower factor of W = kappa R^ii + I
    w: float
    mu_hat: float
    s: float
    logdet_w: float
    kappa: float
    psi: float


def component_summary(y_active: np.ndarray, dist_active: np.ndarray, kappa: float, psi: float,
                      smoothness: float, jitter: float = DEFAULT_JITTER) -> ComponentSummary:
    n = y_active.size
    corr = correlation_from_distances(dist_active, CorrelationSpec(smoothness, psi), jitter)
    wmat = kappa * corr
    wmat.flat[::n + 1] += 1.0
    chol = linalg.cholesky(wmat, lower=True, check_finite=False)
    ones = np.ones(n)
    w_inv_one = linalg.cho_solve((chol, True), ones, check_finite=False)
    w = float(w_inv_one.sum())
    mu_hat = float(w_inv_one @ y_active) / w
    resid = y_active - mu_hat
    s = float(resid @ linalg.cho_solve((chol, True), resid, check_finite=False))
    return ComponentSummary(n=n, y=y_active, corr=corr, chol_w=chol, w=w, mu_hat=mu_hat,
                            s=max(s, 0.0), logdet_w=float(2.0 * np.log(np.diag(chol)).sum()),
                            kappa=kappa, psi=psi)


def collapsed_component_loglik(summary: ComponentSummary, level_mean: float, level_var: float,
                               sigma2: float) -> float:
    """Log density of the active responses given ``(sigma2, kappa, psi)``.

    Equal to ``log N(y | 1 m0, sigma2 W + v0 11')``: the level and the GP
    realization are integrated out.
    """
    n, w = summary.n, summary.w
    vpost = sigma2 / w + level_var
    return (-0.5 * n * (_LOG_2PI + math.log(sigma2)) - 0.5 * summary.logdet_w
            - summary.s / (2.0 * sigma2)
            + 0.5 * (_LOG_2PI + math.log(sigma2 / w))
            - 0.5 * (_LOG_2PI + math.log(vpost))
            - (summary.mu_hat - level_mean) ** 2 / (2.0 * vpost))


@dataclass
class Proposal:
    """Random-walk proposal on ``(log kappa, log psi)`` with robust adaptation."""

    chol: np.ndarray
    n_adapted: int = 0
    n_proposed: int = 0
    n_accepted: int = 0

    @classmethod
    def isotropic(cls, sd: float) -> "Proposal":
        return cls(chol=np.eye(2) * sd)

    @property
    def covariance(self) -> np.ndarray:
        return self.chol @ self.chol.T

    def adapt(self, u: np.ndarray, accept_prob: float, target: float) -> None:
        """Robust adaptive Metropolis update of the proposal factor."""
        self.n_adapted += 1
        step = min(1.0, 2.0 * self.n_adapted ** (-2.0 / 3.0))
        norm2 = float(u @ u)
        if norm2 == 0.0:
            return
        inner = np.eye(2) + step * (accept_prob - target) * np.outer(u, u) / norm2
        cov = self.chol @ inner @ self.chol.T
        try:
            self.chol = linalg.cholesky(0.5 * (cov + cov.T), lower=True)
        except linalg.LinAlgError:
            pass


def _kappa_psi_log_target(summary, m0, v0, sigma2, state, include_likelihood):
    lp = (log_inverse_gamma_scaled_pdf(summary.kappa, state.nu_kappa, state.kappa0)
          + log_inverse_gamma_scaled_pdf(summary.psi, state.nu_psi, state.psi0)
          + math.log(summary.kappa) + math.log(summary.psi))
    if include_likelihood:
        lp += collapsed_component_loglik(summary, m0, v0, sigma2)
    return lp


def metropolis_kappa_psi(state: ModelState, lag: int, y_active: np.ndarray, dist_active: np.ndarray,
                         hyper: Hyperparameters, proposal: Proposal, stream: RandomStream,
                         adapt_target: float | None = None, include_likelihood: bool = True,
                         current: ComponentSummary | None = None):
    """One random-walk Metropolis step for ``(kappa, psi)`` of ``lag`` (1-based).

    Returns ``(summary, accepted)`` where ``summary`` is evaluated at the
    retained value.  With ``adapt_target`` set, the proposal is adapted
    toward that acceptance rate.
    """
    k = lag - 1
    m0, v0 = hyper.level_mean[lag], hyper.level_var[lag]
    sigma2 = state.sigma2[lag]
    if current is None:
        current = component_summary(y_active, dist_active, state.kappa[k], state.psi[k],
                                    hyper.smoothness)
    lp_cur = _kappa_psi_log_target(current, m0, v0, sigma2, state, include_likelihood)
    u = stream.rng.standard_normal(2)
    step = proposal.chol @ u
    kappa_new = state.kappa[k] * math.exp(step[0])
    psi_new = state.psi[k] * math.exp(step[1])
    proposal.n_proposed += 1
    if not (0.0 < kappa_new < 1e300 and 0.0 < psi_new < 1e300):
        accept_prob = 0.0
        cand = None
    else:
        try:
            cand = component_summary(y_active, dist_active, kappa_new, psi_new, hyper.smoothness)
            lp_new = _kappa_psi_log_target(cand, m0, v0, sigma2, state, include_likelihood)
            accept_prob = math.exp(min(0.0, lp_new - lp_cur)) if math.isfinite(lp_new) else 0.0
        except linalg.LinAlgError:
            accept_prob, cand = 0.0, None
    accepted = cand is not None and stream.rng.random() < accept_prob
    if adapt_target is not None:
        proposal.adapt(u, accept_prob, adapt_target)
    if accepted:
        proposal.n_accepted += 1
        return cand, True
    return current, False


def active_f_conditional(summary: ComponentSummary, mu: float, sigma2: float):
    """Mean and covariance of ``f[active]`` given the level and variance.

    ``Sigma = sigma2 (K^-1 + I)^-1`` with ``K = kappa R^ii`` is formed as
    ``sigma2 K (I - W^-1 K)`` so no inverse of ``R^ii`` is needed.
    """
    K = summary.kappa * summary.corr
    K_tilde = linalg.cho_solve((summary.chol_w, True), K, check_finite=False)
    sigma = sigma2 * (K - K @ K_tilde)
    sigma = 0.5 * (sigma + sigma.T)
    return sigma @ (summary.y - mu) / sigma2, sigma


def draw_active_f(summary: ComponentSummary, mu: float, sigma2: float, stream: RandomStream):
    """``f[active]`` from its Gaussian conditional via the matrix inversion lemma."""
    mean, sigma = active_f_conditional(summary, mu, sigma2)
    return draw_mvn_from_factor(stream, mean, cholesky_jittered(sigma))


def draw_inactive_f(dist: np.ndarray, active: np.ndarray, f_active: np.ndarray, kappa: float,
                    psi: float, sigma2: float, smoothness: float, stream: RandomStream):
    """``f[inactive]`` from the GP conditional given ``f[active]``."""
    inactive = ~active
    if not inactive.any():
        return np.zeros(0)
    spec = CorrelationSpec(smoothness, psi)
    r_oo = correlation_from_distances(dist[np.ix_(inactive, inactive)], spec, DEFAULT_JITTER)
    r_oi = correlation_from_distances(dist[np.ix_(inactive, active)], spec)
    r_ii = correlation_from_distances(dist[np.ix_(active, active)], spec, DEFAULT_JITTER)
    chol_ii = cholesky_jittered(r_ii)
    a = linalg.solve_triangular(chol_ii, r_oi.T, lower=True, check_finite=False)
    b = linalg.solve_triangular(chol_ii, f_active, lower=True, check_finite=False)
    mean = a.T @ b
    cov = kappa * sigma2 * (r_oo - a.T @ a)
    chol = cholesky_jittered(0.5 * (cov + cov.T))
    return draw_mvn_from_factor(stream, mean, chol)


@dataclass
class ComponentDraw:
    mu: float
    sigma2: float
    f: np.ndarray
    kappa: float
    psi: float
    accepted: bool | None


def draw_component_prior(state: ModelState, lag: int, dist: np.ndarray, hyper: Hyperparameters,
                         stream: RandomStream) -> ComponentDraw:
    """All parameters of an unoccupied lag component from their priors."""
    kappa = draw_inverse_gamma_scaled(stream, state.nu_kappa, state.kappa0)
    psi = draw_inverse_gamma_scaled(stream, state.nu_psi, state.psi0)
    mu = draw_normal(stream, hyper.level_mean[lag], hyper.level_var[lag])
    sigma2 = draw_inverse_gamma_scaled(stream, hyper.sigma_dof[lag], hyper.sigma_scale[lag])
    corr = correlation_from_distances(dist, CorrelationSpec(hyper.smoothness, psi), DEFAULT_JITTER)
    chol = cholesky_jittered(kappa * sigma2 * corr)
    f = draw_mvn_from_factor(stream, np.zeros(dist.shape[0]), chol)
    return ComponentDraw(mu, sigma2, f, kappa, psi, None)


def component_scan(state: ModelState, data: TimeSeriesData, lag: int, dist: np.ndarray,
                   hyper: Hyperparameters, proposal: Proposal, stream: RandomStream,
                   adapt_target: float | None = None) -> ComponentDraw:
    """Collapsed five-step scan for an occupied lag component."""
    active = state.z == lag
    if not active.any():
        return draw_component_prior(state, lag, dist, hyper, stream)
    y_active = data.response[active]
    dist_active = dist[np.ix_(active, active)]
    summary, accepted = metropolis_kappa_psi(state, lag, y_active, dist_active, hyper, proposal,
                                             stream, adapt_target=adapt_target)
    m0, v0 = hyper.level_mean[lag], hyper.level_var[lag]
    sigma2 = state.sigma2[lag]
    v1 = 1.0 / (1.0 / v0 + summary.w / sigma2)
    m1 = v1 * (m0 / v0 + summary.w * summary.mu_hat / sigma2)
    mu = draw_normal(stream, m1, v1)
    dof, s0 = hyper.sigma_dof[lag], hyper.sigma_scale[lag]
    shape = 0.5 * (dof + summary.n)
    scale = 0.5 * (dof * s0 + summary.w * (summary.mu_hat - mu) ** 2 + summary.s)
    sigma2 = draw_inverse_gamma(stream, shape, scale)
    f = np.empty(data.n_obs)
    f[active] = draw_active_f(summary, mu, sigma2, stream)
    f[~active] = draw_inactive_f(dist, active, f[active], summary.kappa, summary.psi, sigma2,
                                 hyper.smoothness, stream)
    return ComponentDraw(mu, sigma2, f, summary.kappa, summary.psi, accepted)


# ---------------------------------------------------------------------------
# steps 6-7


def dof_log_masses(values: np.ndarray, support, harmonic_mean: float) -> np.ndarray:
    """Unnormalized log masses over a dof support for IG(v/2, v*hm/2) draws ``values``."""
    sup = np.asarray(support, dtype=float)
    if values.size == 0:
        return np.zeros(sup.size)
    return np.array([np.sum(log_inverse_gamma_scaled_pdf(values, v, harmonic_mean)) for v in sup])


def gamma_scale_conditional(values: np.ndarray, dof: float, shape: float, rate: float):
    """``(shape, rate)`` of the gamma full conditional of a harmonic-mean scale
    given the occupied components' draws ``values``."""
    values = np.asarray(values, dtype=float)
    return shape + 0.5 * dof * values.size, rate + 0.5 * dof * float(np.sum(1.0 / values))


def update_covariance_hypers(state: ModelState, counts, hyper: Hyperparameters,
                             stream: RandomStream):
    """Returns ``(nu_kappa, kappa0, nu_psi, psi0)``."""
    occupied = np.asarray(counts)[1:] > 0
    kappas, psis = state.kappa[occupied], state.psi[occupied]

    def pick(values, support, hm):
        lm = dof_log_masses(values, support, hm)
        p = np.exp(lm - lm.max())
        return support[draw_categorical(stream, p / p.sum())]

    nu_kappa = pick(kappas, hyper.kappa_dof_support, state.kappa0)
    nu_psi = pick(psis, hyper.psi_dof_support, state.psi0)
    kappa0 = draw_gamma(stream, *gamma_scale_conditional(kappas, nu_kappa, hyper.kappa0_shape,
                                                         hyper.kappa0_rate))
    psi0 = draw_gamma(stream, *gamma_scale_conditional(psis, nu_psi, hyper.psi0_shape, hyper.psi0_rate))
    return nu_kappa, kappa0, nu_psi, psi0


# ---------------------------------------------------------------------------
# full sweep


class GibbsSampler:
    """Mutable single-chain sampler.  ``step`` performs one full iteration."""

    def __init__(self, data: TimeSeriesData, hyper: Hyperparameters, state: ModelState | None = None,
                 seed: int = 0, chain_id: int = 0, proposal_sd: float = 0.5, n_threads: int = 1):
        if hyper.n_lags != data.n_lags:
            raise InvalidParameterError("hyperparameters and data disagree on the lag horizon")
        self.data = data
        self.hyper = hyper
        self.state = state if state is not None else init_default_state(data, hyper)
        self.chain_id = chain_id
        self.root = RandomStream(seed, (chain_id,))
        self.iteration = 0
        self.dists = [DistanceTable.from_inputs(data.X[:, k]) for k in range(data.n_lags)]
        self.proposals = [Proposal.isotropic(proposal_sd) for _ in range(data.n_lags)]
        self.n_threads = max(1, int(n_threads))
        self._pool = ThreadPoolExecutor(self.n_threads) if self.n_threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _scan(self, lag, it_stream, adapt_target):
        stream = it_stream.child(SLOT_COMPONENT + lag)
        try:
            return component_scan(self.state, self.data, lag, self.dists[lag - 1], self.hyper,
                                  self.proposals[lag - 1], stream, adapt_target)
        except (NumericError, linalg.LinAlgError) as exc:
            raise ChainAbort(str(exc), self.chain_id, self.iteration, lag) from exc

    def _refresh(self, lag, it_stream):
        stream = it_stream.child(SLOT_COMPONENT + lag)
        try:
            return draw_component_prior(self.state, lag, self.dists[lag - 1], self.hyper, stream)
        except (NumericError, linalg.LinAlgError) as exc:
            raise ChainAbort(str(exc), self.chain_id, self.iteration, lag) from exc

    def _map(self, fn, lags):
        if self._pool is not None and len(lags) > 1:
            return list(self._pool.map(fn, lags))
        return [fn(lag) for lag in lags]

    def _apply(self, lag, draw: ComponentDraw):
        s, k = self.state, lag - 1
        s.mu[lag], s.sigma2[lag], s.f[k] = draw.mu, draw.sigma2, draw.f
        s.kappa[k], s.psi[k] = draw.kappa, draw.psi

    def step(self, adapt_target: float | None = None) -> np.ndarray:
        """One Gibbs iteration; returns the allocation counts used."""
        s, hyper = self.state, self.hyper
        it = self.root.child(self.iteration)
        try:
            s.z, counts = update_allocations(s, self.data, it.child(SLOT_Z))
        except NumericError as exc:
            raise ChainAbort(str(exc), self.chain_id, self.iteration) from exc
        s.weights = update_weights(hyper, counts, it.child(SLOT_WEIGHTS))
        s.mu[0], s.sigma2[0] = update_intercept(s, self.data, hyper, it.child(SLOT_INTERCEPT))

        lags = np.arange(1, s.n_lags + 1)
        occupied = [int(l) for l in lags if counts[l] > 0]
        empty = [int(l) for l in lags if counts[l] == 0]
        for lag, draw in zip(occupied, self._map(lambda l: self._scan(l, it, adapt_target), occupied)):
            self._apply(lag, draw)

        s.nu_kappa, s.kappa0, s.nu_psi, s.psi0 = update_covariance_hypers(
            s, counts, hyper, it.child(SLOT_HYPERS))

        for lag, draw in zip(empty, self._map(lambda l: self._refresh(l, it), empty)):
            self._apply(lag, draw)
        self.iteration += 1
        return counts


# ---------------------------------------------------------------------------
# storage


def _lag_names(prefix, L, start):
    return [f"{prefix}_{i}" for i in range(start, L + 1)]


def record_fields(n_lags: int) -> list[str]:
    L = n_lags
    return (["chain", "iteration"] + _lag_names("lambda", L, 0) + _lag_names("mu", L, 0)
            + _lag_names("sigma2", L, 0) + _lag_names("kappa", L, 1) + _lag_names("psi", L, 1)
            + ["nu_kappa", "kappa0", "nu_psi", "psi0"] + _lag_names("n", L, 0) + ["log_likelihood"])


def state_to_record(state: ModelState, counts, chain: int, iteration: int, loglik: float) -> dict:
    L = state.n_lags
    rec = {"chain": int(chain), "iteration": int(iteration)}
    for i in range(L + 1):
        rec[f"lambda_{i}"] = float(state.weights[i])
    for i in range(L + 1):
        rec[f"mu_{i}"] = float(state.mu[i])
    for i in range(L + 1):
        rec[f"sigma2_{i}"] = float(state.sigma2[i])
    for i in range(1, L + 1):
        rec[f"kappa_{i}"] = float(state.kappa[i - 1])
    for i in range(1, L + 1):
        rec[f"psi_{i}"] = float(state.psi[i - 1])
    rec.update(nu_kappa=float(state.nu_kappa), kappa0=float(state.kappa0),
               nu_psi=float(state.nu_psi), psi0=float(state.psi0))
    for i in range(L + 1):
        rec[f"n_{i}"] = int(counts[i])
    rec["log_likelihood"] = float(loglik)
    return rec


def record_to_state(rec: dict, n_lags: int, f: np.ndarray | None = None) -> ModelState:
    L = n_lags
    gather = lambda prefix, start: np.array([rec[f"{prefix}_{i}"] for i in range(start, L + 1)], dtype=float)
    return ModelState(
        z=np.zeros(0, dtype=np.int64),
        weights=gather("lambda", 0), mu=gather("mu", 0), sigma2=gather("sigma2", 0),
        f=np.zeros((L, 0)) if f is None else np.asarray(f, dtype=float),
        kappa=gather("kappa", 1), psi=gather("psi", 1),
        nu_kappa=float(rec["nu_kappa"]), kappa0=float(rec["kappa0"]),
        nu_psi=float(rec["nu_psi"]), psi0=float(rec["psi0"]),
    )


@dataclass
class SampleStore:
    """Retained posterior draws of one or more chains."""

    n_lags: int
    records: list = field(default_factory=list)
    f: list | None = None
    acceptance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def has_f(self) -> bool:
        return self.f is not None and len(self.f) == len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)

    def state(self, i: int) -> ModelState:
        return record_to_state(self.records[i], self.n_lags, self.f[i] if self.has_f else None)

    def states(self):
        for i in range(len(self)):
            yield self.state(i)

    def filter_chains(self, chains) -> "SampleStore":
        keep = [i for i, r in enumerate(self.records) if r["chain"] in set(chains)]
        return SampleStore(self.n_lags, [self.records[i] for i in keep],
                           [self.f[i] for i in keep] if self.has_f else None, dict(self.acceptance))

    def subset(self, indices) -> "SampleStore":
        idx = list(indices)
        return SampleStore(self.n_lags, [self.records[i] for i in idx],
                           [self.f[i] for i in idx] if self.has_f else None, dict(self.acceptance))

    @classmethod
    def merge(cls, stores) -> "SampleStore":
        stores = list(stores)
        out = cls(stores[0].n_lags, [], [] if all(s.has_f for s in stores) else None)
        for s in stores:
            out.records.extend(s.records)
            if out.f is not None:
                out.f.extend(s.f)
            out.acceptance.update(s.acceptance)
        return out


def resolve_threads(n_threads: int | None = None) -> int:
    if n_threads is not None and n_threads > 1:
        return int(n_threads)
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def run_chain(data: TimeSeriesData, hyper: Hyperparameters, config: McmcConfig, chain_id: int = 0,
              progress=None) -> SampleStore:
    """Adaptation, burn-in and thinned retention for one chain."""
    sampler = GibbsSampler(data, hyper, seed=config.seed, chain_id=chain_id,
                           proposal_sd=config.initial_proposal_sd,
                           n_threads=resolve_threads(config.n_threads))
    store = SampleStore(data.n_lags, [], [] if config.store_f else None)
    total = config.n_adapt + config.n_burn + config.n_keep * config.thin
    try:
        for i in range(total):
            adapting = i < config.n_adapt
            counts = sampler.step(config.target_acceptance if adapting else None)
            if i == config.n_adapt - 1:
                for p in sampler.proposals:
                    p.n_proposed = p.n_accepted = 0
            kept = i - config.n_adapt - config.n_burn
            if kept >= 0 and (kept + 1) % config.thin == 0:
                ll = log_likelihood(sampler.state, data)
                store.records.append(state_to_record(sampler.state, counts, chain_id, i, ll))
                if store.f is not None:
                    store.f.append(sampler.state.f.copy())
            if progress is not None:
                progress(i, total)
    finally:
        sampler.close()
    store.acceptance[chain_id] = [p.n_accepted / p.n_proposed if p.n_proposed else float("nan")
                                  for p in sampler.proposals]
    log.info("chain %d done: %d samples, acceptance %s", chain_id, len(store),
             np.round(store.acceptance[chain_id], 3))
    return store
