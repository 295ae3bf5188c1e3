"""Safe Bayesian optimisation with pattern-search point selection.

The classic grid implementation lives in :mod:`safeopt_ps.grid`; the
continuous reformulation, whose subproblems are solved by generalized pattern
search, lives in :mod:`safeopt_ps.reform`.
"""

from ._accel import backend_name
from .errors import (
    ConfigError,
    GpNumericalError,
    NoCandidates,
    NoOutsideStart,
    SafeOptError,
    SafeSetEmpty,
    UnstableBlowUp,
)
from .gp import ConfidenceBand, GpData, GpPosterior, KernelSpec, fit
from .grid import Grid, run_grid
from .model import GpConfig, ModelConfig, Recommendation, SafeOptModel, Source
from .pattern_search import Pattern, PsConfig, PsProblem, maximize
from .reform import Box, ReformConfig, run

__version__ = "0.1.0"

__all__ = [
    "Box", "ConfidenceBand", "ConfigError", "GpConfig", "GpData", "GpNumericalError",
    "GpPosterior", "Grid", "KernelSpec", "ModelConfig", "NoCandidates", "NoOutsideStart",
    "Pattern", "PsConfig", "PsProblem", "Recommendation", "ReformConfig", "SafeOptError",
    "SafeOptModel", "SafeSetEmpty", "Source", "UnstableBlowUp", "backend_name", "fit",
    "maximize", "run", "run_grid",
]
