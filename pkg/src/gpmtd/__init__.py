"""Gaussian-process mixture transition distribution models for nonlinear time series."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, GpmtdError, InvalidParameterError, NumericError  # noqa: E402
from .model import (  # noqa: E402
    Hyperparameters,
    ModelState,
    TimeSeriesData,
    build_design,
    default_hyperparameters,
    init_default_state,
)
from .sampler import GibbsSampler, McmcConfig, SampleStore, run_chain  # noqa: E402
from .sbm import SbmParams  # noqa: E402
from .streams import RandomStream  # noqa: E402

__all__ = [
    "ConfigError", "DataError", "GibbsSampler", "GpmtdError", "Hyperparameters", "InvalidParameterError",
    "McmcConfig", "ModelState", "NumericError", "RandomStream", "SampleStore", "SbmParams",
    "TimeSeriesData", "build_design", "default_hyperparameters", "init_default_state", "run_chain",
    "__version__",
]
