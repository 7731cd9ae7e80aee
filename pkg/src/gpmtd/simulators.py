"""Reference series generators: lag-2 Ricker map and a coupled predator-prey map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidParameterError
from .streams import RandomStream

DIVERGENCE_BOUND = 1e3
KINDS = ("ricker_lag2", "predator_prey")


@dataclass(frozen=True)
class SimSpec:
    kind: str = "ricker_lag2"
    length: int = 105
    burn_in: int = 500
    noise_sd: float | None = None
    r: float | None = None
    a: float | None = None
    b: float | None = None
    initial: tuple | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown simulator {self.kind!r}; expected one of {KINDS}")
        defaults = {
            "ricker_lag2": dict(noise_sd=0.09, r=2.6, a=1.0, b=0.0, initial=(1.0, 1.5)),
            "predator_prey": dict(noise_sd=0.0, r=2.75, a=0.5, b=0.07, initial=(1.0, 1.0)),
        }[self.kind]
        for key, value in defaults.items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if self.length < 1 or self.burn_in < 0:
            raise InvalidParameterError("length must be positive and burn_in non-negative")
        if self.noise_sd < 0:
            raise InvalidParameterError("noise_sd must be non-negative")
        if len(self.initial) != 2 or min(self.initial) <= 0:
            raise InvalidParameterError("need two strictly positive initial values")


def _guard(value: float, t: int) -> None:
    if not (math.isfinite(value) and 0.0 < value < DIVERGENCE_BOUND):
        raise DivergenceError(f"trajectory left (0, {DIVERGENCE_BOUND:g}) at step {t}: {value!r}")


def simulate_ricker_lag2(spec: SimSpec, stream: RandomStream | None = None) -> np.ndarray:
    """``y_t = y_{t-2} exp(r - a y_{t-2}) + eps_t``, ``eps_t ~ N(0, noise_sd^2)``.

    Defaults ``r = 2.6``, ``a = 1``, ``noise_sd = 0.09``.  The two initial
    values and the first ``burn_in`` steps are discarded.
    """
    stream = stream if stream is not None else RandomStream(spec.seed)
    n = spec.burn_in + spec.length
    eps = stream.rng.standard_normal(n) * spec.noise_sd
    y = np.empty(n + 2)
    y[:2] = spec.initial
    for t in range(2, n + 2):
        prev = y[t - 2]
        y[t] = prev * math.exp(spec.r - spec.a * prev) + eps[t - 2]
        _guard(y[t], t)
    return y[2 + spec.burn_in:]


def simulate_predator_prey(spec: SimSpec, stream: RandomStream | None = None):
    """Deterministic coupled Ricker maps; returns ``(y, z, log(y))``.

    ``y_t = y_{t-1} exp(r - a y_{t-1} - b z_{t-1})`` and
    ``z_t = z_{t-1} exp(r - a z_{t-1} + b y_{t-1})``.  ``stream`` is accepted
    for signature uniformity; with ``noise_sd > 0`` it drives multiplicative
    log-normal noise on both coordinates.
    """
    stream = stream if stream is not None else RandomStream(spec.seed)
    n = spec.burn_in + spec.length
    y = np.empty(n + 1)
    z = np.empty(n + 1)
    y[0], z[0] = spec.initial
    noise = (stream.rng.standard_normal((n, 2)) * spec.noise_sd) if spec.noise_sd > 0 else np.zeros((n, 2))
    r, a, b = spec.r, spec.a, spec.b
    for t in range(1, n + 1):
        try:
            y[t] = y[t - 1] * math.exp(r - a * y[t - 1] - b * z[t - 1] + noise[t - 1, 0])
            z[t] = z[t - 1] * math.exp(r - a * z[t - 1] + b * y[t - 1] + noise[t - 1, 1])
        except OverflowError as exc:
            raise DivergenceError(f"overflow at step {t}") from exc
        _guard(y[t], t)
        _guard(z[t], t)
    ys, zs = y[1 + spec.burn_in:], z[1 + spec.burn_in:]
    return ys, zs, np.log(ys)


def simulate(spec: SimSpec, stream: RandomStream | None = None) -> np.ndarray:
    """Primary univariate series of a spec (``y`` for both kinds)."""
    if spec.kind == "ricker_lag2":
        return simulate_ricker_lag2(spec, stream)
    return simulate_predator_prey(spec, stream)[0]
