"""Matérn correlation functions and the dense linear algebra built on them.

Two smoothness values are supported: ``2.5`` and ``inf`` (squared
exponential).  Correlation matrices carry a small diagonal jitter before any
scaling by the GP variance ``kappa * sigma2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidParameterError, NumericError
from .streams import cholesky_jittered

DEFAULT_JITTER = 1e-8
MAX_JITTER = 1e-4
SUPPORTED_SMOOTHNESS = (2.5, math.inf)
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class CorrelationSpec:
    smoothness: float = 2.5
    length_scale: float = 1.0

    def __post_init__(self):
        if self.smoothness not in SUPPORTED_SMOOTHNESS:
            raise InvalidParameterError(
                f"smoothness must be 2.5 or inf, got {self.smoothness}")
        if not (self.length_scale > 0 and math.isfinite(self.length_scale)):
            raise InvalidParameterError(
                f"length_scale must be positive and finite, got {self.length_scale}")


def parse_smoothness(value) -> float:
    """Accept ``2.5``, ``"2.5"``, ``"inf"`` or ``float('inf')``."""
    v = float(value)
    if v not in SUPPORTED_SMOOTHNESS:
        raise InvalidParameterError(f"smoothness must be 2.5 or inf, got {value!r}")
    return v


def _kernel(d: np.ndarray, smoothness: float, length_scale: float) -> np.ndarray:
    r = d / length_scale
    if smoothness == math.inf:
        return np.exp(-0.5 * r * r)
    sr = _SQRT5 * r
    return (1.0 + sr + (5.0 / 3.0) * r * r) * np.exp(-sr)


def correlation(d, spec: CorrelationSpec):
    """Correlation at distance ``d`` (scalar or array)."""
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidParameterError("distances must be finite and non-negative")
    out = _kernel(arr, spec.smoothness, spec.length_scale)
    return float(out) if out.ndim == 0 else out


def distance_matrix(a, b=None) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = a if b is None else np.asarray(b, dtype=float).reshape(-1)
    return np.abs(a[:, None] - b[None, :])


class DistanceTable:
    """Distance matrix stored as an index into its distinct values.

    The kernel is then evaluated once per distinct distance, which is a large
    saving for series with repeated values.  Indexing with a pair of
    ``np.ix_`` arrays (or boolean masks) returns a sub-table.
    """

    def __init__(self, values: np.ndarray, index: np.ndarray):
        self.values = values
        self.index = index

    @classmethod
    def from_inputs(cls, a, b=None) -> "DistanceTable":
        return cls.from_matrix(distance_matrix(a, b))

    @classmethod
    def from_matrix(cls, dist: np.ndarray) -> "DistanceTable":
        values, inverse = np.unique(dist, return_inverse=True)
        return cls(values, inverse.reshape(dist.shape).astype(np.int32))

    @property
    def shape(self):
        return self.index.shape

    def __getitem__(self, key):
        return DistanceTable(self.values, self.index[key])

    def block(self, rows, cols) -> "DistanceTable":
        return DistanceTable(self.values, self.index[np.ix_(rows, cols)])

    def toarray(self) -> np.ndarray:
        return self.values[self.index]


def correlation_from_distances(dist, spec: CorrelationSpec, jitter: float = 0.0) -> np.ndarray:
    """Kernel applied to a precomputed distance matrix (or :class:`DistanceTable`);
    jitter on the diagonal only when the matrix is square."""
    if isinstance(dist, DistanceTable):
        r = _kernel(dist.values, spec.smoothness, spec.length_scale)[dist.index]
    else:
        r = _kernel(np.asarray(dist, dtype=float), spec.smoothness, spec.length_scale)
    if jitter and r.shape[0] == r.shape[1]:
        r.flat[::r.shape[0] + 1] += jitter
    return r


def correlation_matrix(inputs, spec: CorrelationSpec, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    x = np.asarray(inputs, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("inputs must be finite")
    if jitter < 0:
        raise InvalidParameterError("jitter must be non-negative")
    return correlation_from_distances(distance_matrix(x), spec, jitter)


def cross_correlation(a, b, spec: CorrelationSpec) -> np.ndarray:
    return _kernel(distance_matrix(a, b), spec.smoothness, spec.length_scale)


@dataclass
class PartitionedCorr:
    """Correlation matrix split by an active (``i``) / inactive (``o``) mask."""

    full: np.ndarray
    active: np.ndarray

    @property
    def inactive(self) -> np.ndarray:
        return ~self.active

    @property
    def ii(self) -> np.ndarray:
        return self.full[np.ix_(self.active, self.active)]

    @property
    def oo(self) -> np.ndarray:
        return self.full[np.ix_(self.inactive, self.inactive)]

    @property
    def io(self) -> np.ndarray:
        return self.full[np.ix_(self.active, self.inactive)]

    @property
    def oi(self) -> np.ndarray:
        return self.io.T


def cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower factor with the module's jitter escalation policy."""
    return cholesky_jittered(matrix, jitter=DEFAULT_JITTER, max_jitter=MAX_JITTER)


def solve_psd(matrix, rhs) -> np.ndarray:
    chol = cholesky(np.asarray(matrix, dtype=float))
    return linalg.cho_solve((chol, True), np.asarray(rhs, dtype=float), check_finite=False)


def logdet_psd(matrix) -> float:
    chol = cholesky(np.asarray(matrix, dtype=float))
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def _as_index(idx) -> np.ndarray:
    a = np.asarray(idx)
    return a if a.dtype == bool else a.astype(np.intp)


def gp_conditional(cov: np.ndarray, f_i: np.ndarray, idx_i, idx_o):
    """Mean and covariance of ``f[o] | f[i]`` under ``f ~ N(0, cov)``.

    ``idx_i``/``idx_o`` are integer index arrays or boolean masks into ``cov``.
    """
    c = np.asarray(cov, dtype=float)
    io, ii = _as_index(idx_o), _as_index(idx_i)
    c_oo = c[np.ix_(io, io)]
    if c_oo.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    c_oi = c[np.ix_(io, ii)]
    if c_oi.shape[1] == 0:
        return np.zeros(c_oo.shape[0]), c_oo.copy()
    chol = cholesky(c[np.ix_(ii, ii)])
    a = linalg.solve_triangular(chol, c_oi.T, lower=True, check_finite=False)
    b = linalg.solve_triangular(chol, np.asarray(f_i, dtype=float), lower=True, check_finite=False)
    mean = a.T @ b
    cond = c_oo - a.T @ a
    return mean, 0.5 * (cond + cond.T)


def extend_inverse(prev_inverse: np.ndarray, new_column, new_diag: float) -> np.ndarray:
    """Inverse of ``[[A, c], [c', d]]`` given ``A^{-1}``, by block inversion.

    Raises :class:`NumericError` when the Schur complement ``d - c' A^{-1} c``
    is not positive; callers then refactorize from scratch.
    """
    a_inv = np.asarray(prev_inverse, dtype=float)
    c = np.asarray(new_column, dtype=float).reshape(-1)
    u = a_inv @ c
    schur = float(new_diag - c @ u)
    if not schur > 0 or not math.isfinite(schur):
        raise NumericError(f"non-positive Schur complement {schur:.3e} in partitioned inverse")
    n = a_inv.shape[0]
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = a_inv + np.outer(u, u) / schur
    out[:n, n] = -u / schur
    out[n, :n] = -u / schur
    out[n, n] = 1.0 / schur
    return out
