"""Forecasting renewable generation for South American countries."""

from .core import (
    DeterministicRng,
    EnergyRecord,
    EnergySeries,
    InputError,
    MetricReport,
    ModelError,
    RenewcastError,
    Source,
    StorageError,
    UndefinedMetricError,
    mae,
    mape,
    r_squared,
    rmse,
)

__all__ = [
    "DeterministicRng", "EnergyRecord", "EnergySeries", "InputError", "MetricReport",
    "ModelError", "RenewcastError", "Source", "StorageError", "UndefinedMetricError",
    "mae", "mape", "r_squared", "rmse",
]
__version__ = "0.1.0"
