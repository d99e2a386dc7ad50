"""Python bindings for the rfl discrepancy laboratory."""

from ._rfl import (
    ConfigError,
    FitError,
    InvalidInput,
    NumericalError,
    catalog,
    check,
    fit_rate,
    kernel_mass,
    run,
    set_thread_count,
    thread_count,
    trace_identity,
    version,
)

__all__ = [
    "ConfigError",
    "FitError",
    "InvalidInput",
    "NumericalError",
    "catalog",
    "check",
    "fit_rate",
    "kernel_mass",
    "run",
    "set_thread_count",
    "thread_count",
    "trace_identity",
    "version",
]

__version__ = version()
