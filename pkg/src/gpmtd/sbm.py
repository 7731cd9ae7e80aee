"""Stick-breaking mixture (SBM) prior on the mixture weights.

Stick proportions ``theta_j`` (``j = 0..L-1``) are drawn independently from a
three-component beta mixture::

    pi1 * Beta(1, eta) + pi2 * Beta(gamma_j, delta_j) + pi3 * Beta(eta, 1)

and broken into ``L + 1`` weights.  The two outer components act as spikes
near 0 and 1 when ``eta`` is large.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidParameterError
from .streams import RandomStream

THETA_FLOOR = 1e-30
THETA_CEIL = 1.0 - 1e-15


@dataclass(frozen=True)
class SbmParams:
    eta: float = 1000.0
    pi1: float = 0.5
    pi3: float = 0.25
    gamma: tuple = field(default=(1.0,))
    delta: tuple = field(default=(1.0,))

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in np.atleast_1d(self.gamma)))
        object.__setattr__(self, "delta", tuple(float(d) for d in np.atleast_1d(self.delta)))
        if not self.eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {self.eta}")
        if not (0 <= self.pi1 <= 1 and 0 <= self.pi3 <= 1 and self.pi1 + self.pi3 <= 1 + 1e-12):
            raise InvalidParameterError(f"need pi1, pi3 in [0,1] with pi1 + pi3 <= 1, got ({self.pi1}, {self.pi3})")
        if len(self.gamma) != len(self.delta):
            raise InvalidParameterError("gamma and delta must have the same length")
        if min(self.gamma + self.delta) <= 0:
            raise InvalidParameterError("gamma and delta entries must be positive")

    @classmethod
    def default(cls, n_lags: int, **overrides) -> "SbmParams":
        kw = dict(eta=1000.0, pi1=0.5, pi3=0.25, gamma=(1.0,) * n_lags, delta=(1.0,) * n_lags)
        kw.update(overrides)
        for key in ("gamma", "delta"):
            v = np.atleast_1d(np.asarray(kw[key], dtype=float))
            kw[key] = tuple(np.full(n_lags, v[0])) if v.size == 1 else tuple(v)
        return cls(**kw)

    @property
    def pi2(self) -> float:
        return max(0.0, 1.0 - self.pi1 - self.pi3)

    @property
    def n_sticks(self) -> int:
        return len(self.gamma)

    def mixture_weights(self) -> np.ndarray:
        return np.array([self.pi1, self.pi2, self.pi3])

    def beta_shapes(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-stick ``(a, b)`` arrays of shape ``(L, 3)``."""
        g = np.asarray(self.gamma)
        d = np.asarray(self.delta)
        ones = np.ones_like(g)
        a = np.column_stack([ones, g, self.eta * ones])
        b = np.column_stack([self.eta * ones, d, ones])
        return a, b


def stick_break(theta) -> np.ndarray:
    """Weights ``lambda_0..lambda_L`` from stick proportions ``theta_0..theta_{L-1}``."""
    th = np.asarray(theta, dtype=float).reshape(-1)
    if np.any(~np.isfinite(th)) or np.any(th < 0) or np.any(th > 1):
        raise InvalidParameterError("stick proportions must lie in [0, 1]")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - th)])
    lam = np.empty(th.size + 1)
    lam[:-1] = th * remaining[:-1]
    lam[-1] = remaining[-1]
    return lam


def theta_from_weights(weights) -> np.ndarray:
    """Inverse of :func:`stick_break`; ``nan`` where the remaining stick is below 1e-12."""
    lam = np.asarray(weights, dtype=float)
    used = np.concatenate([[0.0], np.cumsum(lam[:-2])]) if lam.size > 1 else np.zeros(0)
    rest = 1.0 - used
    with np.errstate(divide="ignore", invalid="ignore"):
        th = np.where(rest > 1e-12, lam[:-1] / rest, np.nan)
    return th


def _draw_theta(stream: RandomStream, mix: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One theta per row of three-component beta mixtures."""
    rng = stream.rng
    n = mix.shape[0]
    cdf = np.cumsum(mix, axis=1)
    u = rng.random(n) * cdf[:, -1]
    k = np.minimum((cdf <= u[:, None]).sum(axis=1), 2)
    rows = np.arange(n)
    th = rng.beta(a[rows, k], b[rows, k])
    return np.clip(th, THETA_FLOOR, THETA_CEIL)


def sample_prior(params: SbmParams, stream: RandomStream) -> np.ndarray:
    a, b = params.beta_shapes()
    mix = np.tile(params.mixture_weights(), (params.n_sticks, 1))
    return stick_break(_draw_theta(stream, mix, a, b))


def _validate_counts(params: SbmParams, counts) -> np.ndarray:
    n = np.asarray(counts, dtype=float).reshape(-1)
    if n.size != params.n_sticks + 1:
        raise InvalidParameterError(f"expected {params.n_sticks + 1} counts, got {n.size}")
    if np.any(n < 0):
        raise InvalidParameterError("counts must be non-negative")
    return n


def posterior_components(params: SbmParams, counts):
    """Updated mixtures for each stick given allocation counts.

    Returns ``(log_terms, a_star, b_star)``, each of shape ``(L, 3)``, where
    ``log_terms[j, k] = log(pi_k) + log g_j(a_k, b_k, n)``.
    """
    n = _validate_counts(params, counts)
    a, b = params.beta_shapes()
    tail = np.cumsum(n[::-1])[::-1]  # tail[j] = sum_{h >= j} n_h
    n_j = n[:-1, None]
    after = tail[1:, None]
    a_star = a + n_j
    b_star = b + after
    log_g = (gammaln(a + b) - gammaln(a_star + b_star)
             + gammaln(a_star) - gammaln(a) + gammaln(b_star) - gammaln(b))
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.mixture_weights())
    return log_pi[None, :] + log_g, a_star, b_star


def marginal_log_pmf(params: SbmParams, counts) -> float:
    """Log probability of any allocation sequence with these counts, lambda integrated out."""
    log_terms, _, _ = posterior_components(params, counts)
    return float(np.sum(logsumexp(log_terms, axis=1)))


def posterior_update(params: SbmParams, counts, stream: RandomStream) -> np.ndarray:
    """Draw weights from the conjugate SBM-multinomial full conditional."""
    log_terms, a_star, b_star = posterior_components(params, counts)
    mix = np.exp(log_terms - log_terms.max(axis=1, keepdims=True))
    return stick_break(_draw_theta(stream, mix, a_star, b_star))


def log_density_theta(params: SbmParams, theta, counts=None) -> float:
    """Log density of stick proportions under the prior or (given counts) the posterior.

    Used by tests and diagnostics; normalized over ``[0, 1]^L``.
    """
    from scipy.stats import beta as beta_dist

    th = np.asarray(theta, dtype=float)
    if counts is None:
        counts = np.zeros(params.n_sticks + 1)
    log_terms, a_star, b_star = posterior_components(params, counts)
    log_w = log_terms - logsumexp(log_terms, axis=1, keepdims=True)
    comp = beta_dist.logpdf(th[:, None], a_star, b_star)
    return float(np.sum(logsumexp(log_w + comp, axis=1)))


__all__ = [
    "SbmParams", "stick_break", "theta_from_weights", "sample_prior",
    "posterior_components", "marginal_log_pmf", "posterior_update", "log_density_theta",
]
