"""Linear shrinkage of generalized-inverse precision estimators and GMV portfolio weights."""

from . import bellpoly, detlim, plugin_est, randmat, shrink_gmv, shrink_prec, simlab
from .errors import (
    ArgumentError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    PseudoshrinkError,
    SearchError,
    SingularityError,
)
from .plugin_est import PluginContext
from .randmat import SpectralModel, generate_observations, sample_haar_basis
from .shrink_gmv import bona_fide_alpha_mp
from .shrink_prec import bona_fide

__version__ = "0.1.0"

__all__ = [
    "bellpoly",
    "detlim",
    "plugin_est",
    "randmat",
    "shrink_gmv",
    "shrink_prec",
    "simlab",
    "ArgumentError",
    "ConvergenceError",
    "DegeneracyError",
    "DomainError",
    "PseudoshrinkError",
    "SearchError",
    "SingularityError",
    "PluginContext",
    "SpectralModel",
    "generate_observations",
    "sample_haar_basis",
    "bona_fide",
    "bona_fide_alpha_mp",
]
