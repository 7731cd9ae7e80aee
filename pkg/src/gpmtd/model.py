"""Data container, hyperparameters, parameter state and the mixture likelihood.

Indexing convention: arrays over *all* mixture components (weights, levels,
variances, counts) have length ``L + 1`` with index 0 the intercept.  Arrays
over lag components only (``kappa``, ``psi`` and the rows of ``f``) have
length ``L`` with lag ``l`` stored at index ``l - 1``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .covariance import parse_smoothness
from .errors import DataError, InvalidParameterError
from .sbm import SbmParams
from .streams import RandomStream

_LOG_2PI = float(np.log(2.0 * np.pi))

DEFAULT_DOF_SUPPORT = (5.0, 7.5, 10.0, 25.0, 50.0)


@dataclass(frozen=True)
class TimeSeriesData:
    """Observed series and its time-delay design.

    ``X[i, l-1] = y[L + i - l]`` is lag ``l`` of the response ``response[i] =
    y[L + i]``.  The first ``L`` observations only serve as conditioning values.
    """

    y: np.ndarray
    n_lags: int
    X: np.ndarray
    response: np.ndarray

    @property
    def n_obs(self) -> int:
        return self.response.size

    def with_response(self, response) -> "TimeSeriesData":
        """Same design, new response; used by joint-distribution checks."""
        r = np.asarray(response, dtype=float).copy()
        if r.shape != self.response.shape:
            raise DataError("replacement response has the wrong length")
        return replace(self, response=r)


def build_design(y, n_lags: int) -> TimeSeriesData:
    series = np.asarray(y, dtype=float).reshape(-1)
    L = int(n_lags)
    if L < 1:
        raise DataError(f"lag horizon must be a positive integer, got {n_lags}")
    if not np.all(np.isfinite(series)):
        raise DataError("series contains non-finite values")
    if series.size - L < 2:
        raise DataError(f"need at least L + 2 = {L + 2} observations, got {series.size}")
    T = series.size
    X = np.column_stack([series[L - lag:T - lag] for lag in range(1, L + 1)])
    return TimeSeriesData(y=series.copy(), n_lags=L, X=X, response=series[L:].copy())


@dataclass
class Hyperparameters:
    level_mean: np.ndarray          # m0 per component, length L+1
    level_var: np.ndarray           # v0 per component
    sigma_dof: np.ndarray           # nu_sigma per component
    sigma_scale: np.ndarray         # s0 (prior harmonic mean of sigma2) per component
    kappa_dof_support: tuple = DEFAULT_DOF_SUPPORT
    psi_dof_support: tuple = DEFAULT_DOF_SUPPORT
    kappa0_shape: float = 10.0
    kappa0_rate: float = 0.1
    psi0_shape: float = 10.0
    psi0_rate: float = 1.0
    sbm: SbmParams = field(default_factory=SbmParams)
    smoothness: float = 2.5

    def __post_init__(self):
        for name in ("level_mean", "level_var", "sigma_dof", "sigma_scale"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        self.kappa_dof_support = tuple(sorted(float(v) for v in self.kappa_dof_support))
        self.psi_dof_support = tuple(sorted(float(v) for v in self.psi_dof_support))
        self.smoothness = parse_smoothness(self.smoothness)
        self.validate()

    @property
    def n_lags(self) -> int:
        return self.level_mean.size - 1

    def validate(self) -> None:
        n = self.level_mean.size
        for name in ("level_var", "sigma_dof", "sigma_scale"):
            v = getattr(self, name)
            if v.size != n:
                raise InvalidParameterError(f"{name} must have {n} entries, got {v.size}")
            if not np.all(v > 0) or not np.all(np.isfinite(v)):
                raise InvalidParameterError(f"{name} entries must be positive and finite")
        if not np.all(np.isfinite(self.level_mean)):
            raise InvalidParameterError("level_mean entries must be finite")
        for name in ("kappa_dof_support", "psi_dof_support"):
            s = getattr(self, name)
            if not s or min(s) <= 0:
                raise InvalidParameterError(f"{name} must be non-empty with positive entries")
        for name in ("kappa0_shape", "kappa0_rate", "psi0_shape", "psi0_rate"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.sbm.n_sticks != n - 1:
            raise InvalidParameterError(
                f"SBM prior has {self.sbm.n_sticks} sticks but the model has {n - 1} lags")


def data_range(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() - v.min())


def default_hyperparameters(data: TimeSeriesData, smoothness: float = 2.5) -> Hyperparameters:
    rng = data_range(data.y)
    if rng <= 0:
        raise DataError("series is constant; GP length scales are undefined")
    L = data.n_lags
    ones = np.ones(L + 1)
    scale = ones.copy()
    scale[0] = (10.0 * rng) ** 2
    return Hyperparameters(
        level_mean=np.zeros(L + 1),
        level_var=ones * rng ** 2,
        sigma_dof=ones * 5.0,
        sigma_scale=scale,
        sbm=SbmParams.default(L),
        smoothness=smoothness,
    )


@dataclass
class ModelState:
    z: np.ndarray            # allocations in 0..L, length n_obs
    weights: np.ndarray      # lambda, length L+1
    mu: np.ndarray           # levels, length L+1
    sigma2: np.ndarray       # variances, length L+1
    f: np.ndarray            # GP realizations, shape (L, n_obs)
    kappa: np.ndarray        # SNR per lag, length L
    psi: np.ndarray          # length scale per lag, length L
    nu_kappa: float
    kappa0: float
    nu_psi: float
    psi0: float

    @property
    def n_lags(self) -> int:
        return self.kappa.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.n_lags + 1)

    def copy(self) -> "ModelState":
        return copy.deepcopy(self)

    def check(self, hyper: Hyperparameters | None = None) -> None:
        """Raise if any positivity / simplex / support invariant is broken."""
        for name in ("sigma2", "kappa", "psi"):
            if not np.all(getattr(self, name) > 0):
                raise InvalidParameterError(f"{name} must be strictly positive")
        if not (self.kappa0 > 0 and self.psi0 > 0):
            raise InvalidParameterError("kappa0 and psi0 must be strictly positive")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise InvalidParameterError("weights are not a probability vector")
        if self.z.min(initial=0) < 0 or self.z.max(initial=0) > self.n_lags:
            raise InvalidParameterError("allocation out of range")
        if hyper is not None:
            if self.nu_kappa not in hyper.kappa_dof_support or self.nu_psi not in hyper.psi_dof_support:
                raise InvalidParameterError("dof parameter outside its support")


def init_default_state(data: TimeSeriesData, hyper: Hyperparameters,
                       stream: RandomStream | None = None) -> ModelState:
    """Deterministic starting point: standard-normal components, uniform weights,
    everything allocated to the intercept.  ``stream`` is accepted for a
    uniform signature and is not consumed."""
    L, n = data.n_lags, data.n_obs
    kappa0 = hyper.kappa0_shape / hyper.kappa0_rate
    psi0 = hyper.psi0_shape / hyper.psi0_rate
    return ModelState(
        z=np.zeros(n, dtype=np.int64),
        weights=np.full(L + 1, 1.0 / (L + 1)),
        mu=np.zeros(L + 1),
        sigma2=np.ones(L + 1),
        f=np.zeros((L, n)),
        kappa=np.full(L, kappa0),
        psi=np.full(L, psi0),
        nu_kappa=hyper.kappa_dof_support[0],
        kappa0=kappa0,
        nu_psi=hyper.psi_dof_support[0],
        psi0=psi0,
    )


def component_means(state: ModelState) -> np.ndarray:
    """``(n_obs, L+1)`` matrix of component means per observation."""
    n = state.f.shape[1]
    means = np.empty((n, state.n_lags + 1))
    means[:, 0] = state.mu[0]
    means[:, 1:] = state.mu[1:][None, :] + state.f.T
    return means


def log_normal_pdf(y, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


def component_log_weights(state: ModelState, response: np.ndarray) -> np.ndarray:
    """``log lambda_l + log N(y_t | mean_tl, sigma2_l)``, shape ``(n_obs, L+1)``."""
    means = component_means(state)
    with np.errstate(divide="ignore"):
        log_lam = np.log(state.weights)
    return log_lam[None, :] + log_normal_pdf(response[:, None], means, state.sigma2[None, :])


def log_likelihood(state: ModelState, data: TimeSeriesData) -> float:
    """Observed-data mixture log-likelihood with allocations marginalized."""
    lw = component_log_weights(state, data.response)
    return float(np.sum(logsumexp(lw, axis=1)))
