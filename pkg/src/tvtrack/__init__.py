"""Online first-order methods for time-varying convex optimization and their tracking errors."""

from .problems import (FunctionSequenceOracle, OnlineNesterovFunction, RotatingQuadratic,
                       SmoothnessProfile, TranslatingQuadratic)
from .solvers import Abstain, Alg, AlgParams, Olnm, Orgd, OrgdParams, olnm_restart_length
from .analysis import evaluate_bounds, rotating_spectral_radius, track

__version__ = "0.1.0"

__all__ = [
    "FunctionSequenceOracle", "OnlineNesterovFunction", "RotatingQuadratic",
    "SmoothnessProfile", "TranslatingQuadratic", "Abstain", "Alg", "AlgParams", "Olnm",
    "Orgd", "OrgdParams", "olnm_restart_length", "evaluate_bounds",
    "rotating_spectral_radius", "track",
]
