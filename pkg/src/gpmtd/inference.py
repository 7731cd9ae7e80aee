"""Posterior functionals: transition densities and means, summaries, forecasts.

Off-design values of a GP realization use the conditional mean given the
stored realization for density/mean estimation, and a conditional draw when
simulating forecast paths.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .covariance import (DEFAULT_JITTER, CorrelationSpec, DistanceTable, correlation_from_distances,
                         cross_correlation, distance_matrix, extend_inverse)
from .errors import InvalidParameterError, NumericError
from .model import ModelState, TimeSeriesData, log_normal_pdf
from .sampler import SampleStore, record_fields
from .streams import RandomStream, cholesky_jittered

log = logging.getLogger(__name__)

FILL_POLICIES = ("mean", "value", "uniform")
DEFAULT_THRESHOLD = 0.01


@dataclass
class LagContext:
    """Lag values at which to evaluate transition functionals.

    ``given`` marks lags whose value was supplied explicitly.  Remaining lags
    are filled by ``fill``: the series mean, ``fill_value``, or a uniform draw
    over the data range for every posterior sample.
    """

    values: np.ndarray
    active: np.ndarray
    given: np.ndarray
    fill: str = "mean"
    data_range: tuple = (0.0, 1.0)

    def resolve(self, stream: RandomStream | None = None) -> np.ndarray:
        if self.fill != "uniform":
            return self.values
        if stream is None:
            raise InvalidParameterError("uniform fill needs a random stream")
        out = self.values.copy()
        free = ~self.given
        lo, hi = self.data_range
        out[free] = stream.rng.uniform(lo, hi, int(free.sum()))
        return out


def active_lags(samples: SampleStore, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Lags whose posterior mean weight reaches ``threshold`` (boolean, length L)."""
    means = np.array([samples.column(f"lambda_{l}").mean() for l in range(1, samples.n_lags + 1)])
    return means >= threshold


def make_context(data: TimeSeriesData, given: dict, active=None, fill: str = "mean",
                 fill_value: float | None = None) -> LagContext:
    """Build a context from ``{lag: value}``; other lags are filled per ``fill``."""
    if fill not in FILL_POLICIES:
        raise InvalidParameterError(f"fill must be one of {FILL_POLICIES}, got {fill!r}")
    L = data.n_lags
    values = np.full(L, np.nan)
    mask = np.zeros(L, dtype=bool)
    for lag, v in given.items():
        lag = int(lag)
        if not 1 <= lag <= L:
            raise InvalidParameterError(f"lag {lag} outside 1..{L}")
        values[lag - 1] = float(v)
        mask[lag - 1] = True
    if fill == "value":
        if fill_value is None:
            raise InvalidParameterError("fill='value' needs fill_value")
        default = float(fill_value)
    else:
        default = float(np.mean(data.y))
    values[~mask] = default
    act = np.ones(L, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    unset_active = act & ~mask
    if unset_active.any() and given:
        log.warning("lags %s are active but were not given; filling with %s",
                    list(np.flatnonzero(unset_active) + 1), fill)
    rng = float(data.y.max() - data.y.min())
    for lag, v in given.items():
        if abs(v - data.y.mean()) > 3 * rng:
            log.warning("context value %g for lag %s is far outside the data range", v, lag)
    return LagContext(values=values, active=act, given=mask, fill=fill,
                      data_range=(float(data.y.min()), float(data.y.max())))


class GpInterpolator:
    """Conditional-mean predictor of every lag realization of one sample."""

    def __init__(self, state: ModelState, data: TimeSeriesData, smoothness: float,
                 jitter: float = DEFAULT_JITTER, dists=None):
        if state.f.shape[1] != data.n_obs:
            raise InvalidParameterError(
                "sample carries no GP realizations; refit with store_f enabled")
        self.state = state
        self.data = data
        self.smoothness = smoothness
        self._alpha = {}
        self._jitter = jitter
        self._dists = dists

    def _coef(self, lag: int) -> np.ndarray:
        if lag not in self._alpha:
            k = lag - 1
            spec = CorrelationSpec(self.smoothness, self.state.psi[k])
            dist = self._dists[k] if self._dists is not None else distance_matrix(self.data.X[:, k])
            corr = correlation_from_distances(dist, spec, self._jitter)
            chol = cholesky_jittered(corr)
            self._alpha[lag] = linalg.cho_solve((chol, True), self.state.f[k], check_finite=False)
        return self._alpha[lag]

    def predict(self, lag: int, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inputs = self.data.X[:, lag - 1]
        spec = CorrelationSpec(self.smoothness, self.state.psi[lag - 1])
        out = cross_correlation(x, inputs, spec) @ self._coef(lag)
        # at an observed input the conditional mean is the realization itself;
        # this removes the O(jitter) bias of the jittered solve
        order = np.argsort(inputs, kind="stable")
        pos = np.clip(np.searchsorted(inputs[order], x), 0, inputs.size - 1)
        hit = inputs[order][pos] == x
        out[hit] = self.state.f[lag - 1][order[pos[hit]]]
        return out


def lag_means(state: ModelState, data: TimeSeriesData, context_values, smoothness: float,
              interp: GpInterpolator | None = None) -> np.ndarray:
    """Component means ``(mu_0, mu_l + f_l(context_l) for l = 1..L)``."""
    interp = interp or GpInterpolator(state, data, smoothness)
    out = np.empty(state.n_lags + 1)
    out[0] = state.mu[0]
    for lag in range(1, state.n_lags + 1):
        if state.weights[lag] == 0.0:
            out[lag] = state.mu[lag]
            continue
        out[lag] = state.mu[lag] + interp.predict(lag, context_values[lag - 1])[0]
    return out


def mixture_density(weights, means, variances, grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    comp = np.exp(log_normal_pdf(g[:, None], means[None, :], variances[None, :]))
    return comp @ weights


def transition_density(state: ModelState, data: TimeSeriesData, context_values, grid,
                       smoothness: float, interp: GpInterpolator | None = None) -> np.ndarray:
    means = lag_means(state, data, context_values, smoothness, interp)
    return mixture_density(state.weights, means, state.sigma2, grid)


def transition_mean(state: ModelState, data: TimeSeriesData, context_values, smoothness: float,
                    interp: GpInterpolator | None = None) -> float:
    means = lag_means(state, data, context_values, smoothness, interp)
    return float(state.weights @ means)


def default_grid(data: TimeSeriesData, n_points: int = 201, padding: float = 0.1) -> np.ndarray:
    lo, hi = float(data.y.min()), float(data.y.max())
    pad = padding * (hi - lo)
    return np.linspace(lo - pad, hi + pad, int(n_points))


def covering_grid(weights, means, variances, n_sd: float = 8.0, n_per: int = 401) -> np.ndarray:
    """Union of per-component grids spanning ``mean +- n_sd * sd``; used to
    integrate a mixture density without missing any component's mass."""
    parts = []
    for lam, m, v in zip(weights, means, variances):
        if lam <= 0:
            continue
        sd = float(np.sqrt(v))
        parts.append(np.linspace(m - n_sd * sd, m + n_sd * sd, n_per))
    return np.unique(np.concatenate(parts))


def _band(values: np.ndarray, axis=0):
    return (values.mean(axis=axis), np.quantile(values, 0.025, axis=axis),
            np.quantile(values, 0.975, axis=axis))


@dataclass
class DensityGrid:
    grid: np.ndarray
    densities: np.ndarray          # (n_samples, n_grid)
    mean: np.ndarray = field(init=False)
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean, self.lower, self.upper = _band(self.densities)


def _stream_for(stream, i):
    return stream.child(i) if stream is not None else None


def density_grid(samples: SampleStore, data: TimeSeriesData, context: LagContext, grid,
                 smoothness: float, stream: RandomStream | None = None) -> DensityGrid:
    grid = np.asarray(grid, dtype=float)
    dists = [DistanceTable.from_inputs(data.X[:, k]) for k in range(data.n_lags)]
    out = np.empty((len(samples), grid.size))
    for i, state in enumerate(samples.states()):
        values = context.resolve(_stream_for(stream, i))
        interp = GpInterpolator(state, data, smoothness, dists=dists)
        out[i] = transition_density(state, data, values, grid, smoothness, interp)
    return DensityGrid(grid, out)


@dataclass
class MeanCurve:
    x: np.ndarray
    values: np.ndarray             # (n_samples, n_x)
    mean: np.ndarray = field(init=False)
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean, self.lower, self.upper = _band(self.values)


def mean_curve(samples: SampleStore, data: TimeSeriesData, context: LagContext, lag: int, x,
               smoothness: float, stream: RandomStream | None = None) -> MeanCurve:
    """Transition mean as ``lag`` sweeps over ``x`` with the other lags held at ``context``."""
    x = np.asarray(x, dtype=float)
    dists = [DistanceTable.from_inputs(data.X[:, k]) for k in range(data.n_lags)]
    out = np.empty((len(samples), x.size))
    for i, state in enumerate(samples.states()):
        values = context.resolve(_stream_for(stream, i))
        interp = GpInterpolator(state, data, smoothness, dists=dists)
        means = lag_means(state, data, values, smoothness, interp)
        base = float(state.weights @ means) - state.weights[lag] * means[lag]
        if state.weights[lag] == 0.0:
            out[i] = base
        else:
            out[i] = base + state.weights[lag] * (state.mu[lag] + interp.predict(lag, x))
    return MeanCurve(x, out)


def summarize_posterior(samples: SampleStore) -> list[dict]:
    """Mean and equal-tailed 95% interval of every scalar parameter."""
    if len(samples) < 2:
        raise InvalidParameterError("need at least two samples to summarize")
    names = [n for n in record_fields(samples.n_lags)
             if n not in ("chain", "iteration", "log_likelihood") and not n.startswith("n_")]
    rows = []
    for name in names:
        col = samples.column(name)
        rows.append({"parameter": name, "mean": float(col.mean()),
                     "q2.5": float(np.quantile(col, 0.025)),
                     "q97.5": float(np.quantile(col, 0.975))})
    return rows


class _ForecastGP:
    """One lag's realization grown point by point with a stored inverse."""

    def __init__(self, inputs: np.ndarray, f: np.ndarray, kappa: float, sigma2: float, psi: float,
                 smoothness: float):
        self.spec = CorrelationSpec(smoothness, psi)
        self.scale = kappa * sigma2
        self.inputs = [float(v) for v in inputs]
        self.f = [float(v) for v in f]
        cov = self.scale * correlation_from_distances(distance_matrix(inputs), self.spec, DEFAULT_JITTER)
        self.cov = cov
        chol = cholesky_jittered(cov)
        self.inverse = linalg.cho_solve((chol, True), np.eye(cov.shape[0]), check_finite=False)
        self.n_refactor = 0

    def extend(self, x_new: float, stream: RandomStream) -> float:
        c = self.scale * cross_correlation([x_new], self.inputs, self.spec)[0]
        c_diag = self.scale
        f_vec = np.asarray(self.f)
        mean = float(c @ self.inverse @ f_vec)
        try:
            new_inverse = extend_inverse(self.inverse, c, c_diag)
            var = float(1.0 / new_inverse[-1, -1])
        except NumericError:
            new_inverse, mean, var = self._refactor(c, c_diag, f_vec)
        value = mean + np.sqrt(max(var, 0.0)) * stream.rng.standard_normal()
        n = self.cov.shape[0]
        grown = np.empty((n + 1, n + 1))
        grown[:n, :n] = self.cov
        grown[:n, n] = grown[n, :n] = c
        grown[n, n] = c_diag
        self.cov = grown
        self.inverse = new_inverse
        self.inputs.append(float(x_new))
        self.f.append(float(value))
        return float(value)

    def _refactor(self, c, c_diag, f_vec):
        self.n_refactor += 1
        n = self.cov.shape[0]
        grown = np.empty((n + 1, n + 1))
        grown[:n, :n] = self.cov
        grown[:n, n] = grown[n, :n] = c
        grown[n, n] = c_diag
        chol = cholesky_jittered(grown)
        inverse = linalg.cho_solve((chol, True), np.eye(n + 1), check_finite=False)
        chol_old = chol[:n, :n]
        a = linalg.solve_triangular(chol_old, c, lower=True, check_finite=False)
        b = linalg.solve_triangular(chol_old, f_vec, lower=True, check_finite=False)
        return inverse, float(a @ b), float(chol[n, n] ** 2)


def k_step_forecast(state: ModelState, data: TimeSeriesData, K: int, smoothness: float,
                    stream: RandomStream, return_gps: bool = False):
    """Simulate ``(y, z)`` for steps ``T+1..T+K`` from one posterior sample.

    The sample itself is not modified; GP extensions live only for this call.
    """
    if K < 1:
        raise InvalidParameterError("K must be at least 1")
    if state.f.shape[1] != data.n_obs:
        raise InvalidParameterError("sample carries no GP realizations; refit with store_f enabled")
    history = list(data.y)
    gps: dict[int, _ForecastGP] = {}
    cdf = np.cumsum(state.weights)
    ys, zs = np.empty(K), np.empty(K, dtype=np.int64)
    for k in range(K):
        u = stream.rng.random() * cdf[-1]
        comp = int(min(np.searchsorted(cdf, u, side="right"), state.n_lags))
        if comp == 0:
            mean = state.mu[0]
        else:
            if comp not in gps:
                gps[comp] = _ForecastGP(data.X[:, comp - 1], state.f[comp - 1], state.kappa[comp - 1],
                                        state.sigma2[comp], state.psi[comp - 1], smoothness)
            mean = state.mu[comp] + gps[comp].extend(history[-comp], stream)
        y = mean + np.sqrt(state.sigma2[comp]) * stream.rng.standard_normal()
        history.append(float(y))
        ys[k], zs[k] = y, comp
    if return_gps:
        return ys, zs, gps
    return ys, zs
