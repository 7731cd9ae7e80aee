"""Seeded random streams and the scalar/vector samplers used by the sampler.

Every stream is identified by a 64-bit ``seed`` and an integer ``path``
(e.g. ``(chain, iteration, component)``).  The pair is mapped onto numpy's
:class:`~numpy.random.SeedSequence` spawn-key mechanism, so substreams with
distinct paths are independent and any ``(seed, path)`` can be replayed
exactly, regardless of the order in which streams are created.

The inverse-gamma sampler uses the gamma reciprocal identity::

    X = dof * harmonic_mean / (2 * G),   G ~ Gamma(shape=dof/2, rate=1)

which is IG(shape=dof/2, scale=dof*harmonic_mean/2).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import InvalidParameterError, NumericError

PROB_TOLERANCE = 1e-8


class RandomStream:
    """A replayable source of random draws keyed by ``(seed, path)``.

    A stream owns one underlying generator; it must not be shared between
    threads.  Use :meth:`child` to derive independent substreams.
    """

    __slots__ = ("seed", "path", "_rng")

    def __init__(self, seed: int, path: Sequence[int] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if any(p < 0 for p in self.path):
            raise InvalidParameterError(f"stream path entries must be non-negative, got {self.path}")
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._rng = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(keys))

    @property
    def rng(self) -> np.random.Generator:
        return self._rng

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value}")


def draw_normal(stream: RandomStream, mean: float, variance: float) -> float:
    _check_finite("mean", mean)
    _check_finite("variance", variance)
    if variance < 0:
        raise InvalidParameterError(f"variance must be non-negative, got {variance}")
    if variance == 0:
        return float(mean)
    return float(mean + math.sqrt(variance) * stream.rng.standard_normal())


def draw_gamma(stream: RandomStream, shape: float, rate: float) -> float:
    """Gamma variate with mean ``shape / rate``."""
    _check_finite("shape", shape)
    _check_finite("rate", rate)
    if shape <= 0 or rate <= 0:
        raise InvalidParameterError(f"gamma needs shape > 0 and rate > 0, got ({shape}, {rate})")
    return float(stream.rng.standard_gamma(shape) / rate)


def draw_inverse_gamma(stream: RandomStream, shape: float, scale: float) -> float:
    """Inverse-gamma variate, density proportional to ``x**(-shape-1) exp(-scale/x)``."""
    _check_finite("shape", shape)
    _check_finite("scale", scale)
    if shape <= 0 or scale <= 0:
        raise InvalidParameterError(f"inverse-gamma needs shape > 0 and scale > 0, got ({shape}, {scale})")
    g = stream.rng.standard_gamma(shape)
    # standard_gamma can return exactly 0 for tiny shapes
    g = max(g, np.finfo(float).tiny)
    return float(scale / g)


def draw_inverse_gamma_scaled(stream: RandomStream, dof: float, harmonic_mean: float) -> float:
    """Scaled inverse chi-squared draw: IG(dof/2, dof*harmonic_mean/2)."""
    _check_finite("dof", dof)
    _check_finite("harmonic_mean", harmonic_mean)
    if dof <= 0 or harmonic_mean <= 0:
        raise InvalidParameterError(
            f"scaled inverse-gamma needs dof > 0 and harmonic_mean > 0, got ({dof}, {harmonic_mean})"
        )
    return draw_inverse_gamma(stream, 0.5 * dof, 0.5 * dof * harmonic_mean)


def draw_beta(stream: RandomStream, a: float, b: float) -> float:
    _check_finite("a", a)
    _check_finite("b", b)
    if a <= 0 or b <= 0:
        raise InvalidParameterError(f"beta needs a > 0 and b > 0, got ({a}, {b})")
    return float(stream.rng.beta(a, b))


def normalize_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidParameterError("probability vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidParameterError(f"probabilities must be finite and non-negative, got {p}")
    total = p.sum()
    if total <= 0:
        raise InvalidParameterError("probability vector is all zero")
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise InvalidParameterError(f"probabilities sum to {total!r}, not 1")
    return p / total


def draw_categorical(stream: RandomStream, probs) -> int:
    p = normalize_probs(probs)
    u = stream.rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    # guard the u == cumsum[-1] rounding edge; never land on a zero-mass cell
    idx = min(idx, p.size - 1)
    while p[idx] == 0.0:
        idx -= 1
    return idx


def draw_categorical_logits(stream: RandomStream, log_weights: np.ndarray) -> np.ndarray:
    """One categorical draw per row of unnormalized log-probabilities.

    Rows are normalized in log space with max subtraction, so arbitrarily small
    densities do not underflow.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 2:
        raise InvalidParameterError("log_weights must be a 2-d array (rows = draws)")
    top = lw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise NumericError("every category has zero probability in some row")
    p = np.exp(lw - top)
    cdf = np.cumsum(p, axis=1)
    u = stream.rng.random(lw.shape[0]) * cdf[:, -1]
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, lw.shape[1] - 1)


def cholesky_jittered(matrix: np.ndarray, jitter: float = 1e-8, max_jitter: float = 1e-4,
                      start_with_zero: bool = True) -> np.ndarray:
    """Lower Cholesky factor, adding ``jitter * mean(diag)`` on failure.

    Jitter escalates by a factor of 10 up to ``max_jitter``; after that a
    :class:`NumericError` carrying the minimum eigenvalue is raised.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = float(np.mean(np.diag(a)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    eps = 0.0 if start_with_zero else jitter
    while True:
        try:
            trial = a if eps == 0.0 else a + (eps * scale) * np.eye(n)
            return linalg.cholesky(trial, lower=True, check_finite=False)
        except linalg.LinAlgError:
            pass
        eps = jitter if eps == 0.0 else eps * 10.0
        if eps > max_jitter * (1 + 1e-9):
            break
    min_eig = float(np.linalg.eigvalsh(0.5 * (a + a.T))[0]) if np.all(np.isfinite(a)) else None
    raise NumericError("Cholesky factorization failed after jitter escalation; "
                       "try a larger jitter", min_eigenvalue=min_eig)


def draw_mvn_chol(stream: RandomStream, mean, covariance) -> np.ndarray:
    m = np.asarray(mean, dtype=float).reshape(-1)
    if m.size == 0:
        return np.zeros(0)
    chol = cholesky_jittered(np.asarray(covariance, dtype=float))
    return m + chol @ stream.rng.standard_normal(m.size)


def draw_mvn_from_factor(stream: RandomStream, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Draw using a precomputed lower Cholesky factor."""
    if mean.size == 0:
        return np.zeros(0)
    return mean + chol @ stream.rng.standard_normal(mean.size)
