"""Low-rank plus sparse spectral density matrix estimation with eigenvalue unshrinkage."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BundleError,
    DegenerateInputError,
    DimensionError,
    NoAdmissibleSolutionError,
    NotPositiveDefiniteError,
    NumericError,
    ParseError,
    UnalseError,
)
from .periodogram import TimeSeriesPanel, frequency_grid, smoothed_periodogram  # noqa: E402
from .pipeline import EstimateOptions, estimate_panel  # noqa: E402
from .selection import ThresholdConfig, auto_tune, select_thresholds  # noqa: E402
from .simulate import SimulationConfig, preset, simulate  # noqa: E402
from .solver import SolverConfig, alse_solve, soft_threshold, svt  # noqa: E402
from .unshrink import unshrink  # noqa: E402

__all__ = [
    "BundleError",
    "DegenerateInputError",
    "DimensionError",
    "EstimateOptions",
    "NoAdmissibleSolutionError",
    "NotPositiveDefiniteError",
    "NumericError",
    "ParseError",
    "SimulationConfig",
    "SolverConfig",
    "ThresholdConfig",
    "TimeSeriesPanel",
    "UnalseError",
    "alse_solve",
    "auto_tune",
    "estimate_panel",
    "frequency_grid",
    "preset",
    "select_thresholds",
    "simulate",
    "smoothed_periodogram",
    "soft_threshold",
    "svt",
    "unshrink",
]
