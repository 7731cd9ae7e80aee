"""Exception hierarchy shared by the library and the command-line front end."""

from __future__ import annotations


class GpmtdError(Exception):
    """Base class for all errors raised by :mod:`gpmtd`."""

    exit_code = 1


class InvalidParameterError(GpmtdError, ValueError):
    """A distribution or model parameter is outside its admissible range."""

    exit_code = 2


class ConfigError(GpmtdError):
    """A run configuration failed validation.

    ``key_path`` names the offending entry, e.g. ``"mcmc.thin"``.
    """

    exit_code = 2

    def __init__(self, message: str, key_path: str | None = None):
        self.key_path = key_path
        self._raw = message
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (self._raw, self.key_path))


class DataError(GpmtdError, ValueError):
    """Input series is unusable (too short, non-finite, constant...)."""

    exit_code = 3


class NumericError(GpmtdError, ArithmeticError):
    """A matrix factorization or density evaluation broke down.

    ``min_eigenvalue`` carries the smallest eigenvalue estimate of the matrix
    that failed to factorize, when one is available.
    """

    exit_code = 4

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        self.min_eigenvalue = min_eigenvalue
        if min_eigenvalue is not None:
            message = f"{message} (min eigenvalue {min_eigenvalue:.3e})"
        super().__init__(message)


class DivergenceError(NumericError):
    """A simulated trajectory left its admissible range."""


class ChainAbort(NumericError):
    """Unrecoverable numeric failure inside an MCMC chain."""

    def __init__(self, message: str, chain: int, iteration: int, component: int | None = None):
        self.chain = chain
        self.iteration = iteration
        self.component = component
        where = f"chain {chain}, iteration {iteration}"
        if component is not None:
            where += f", component {component}"
        self._raw = message
        super().__init__(f"{where}: {message}")

    def __reduce__(self):
        # keeps the exception picklable across worker processes
        return (type(self), (self._raw, self.chain, self.iteration, self.component))
