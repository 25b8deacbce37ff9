"""Quantum recurrent network forecasting trained by Adam, CMA-ES, or both."""

from .errors import ConfigurationError, DataError, OptimizationError, RunAborted, UsageError
from .qrnn import QrnnConfig, build_ansatz, forecast, run_sequence, step

__version__ = "0.1.0"
