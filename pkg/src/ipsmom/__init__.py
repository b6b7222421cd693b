"""Simulation, exact moments and method-of-moments estimation for a vertex/edge
particle system on a dynamic random graph, observed through edge counts only."""

from .errors import IpsError
from .model import Link, ModelParams, SystemState, VertexState, validate_params
from .simulator import ObservationSeries, simulate
from .estimator import EstimationResult, estimate_all

__all__ = [
    "EstimationResult",
    "IpsError",
    "Link",
    "ModelParams",
    "ObservationSeries",
    "SystemState",
    "VertexState",
    "estimate_all",
    "simulate",
    "validate_params",
]

__version__ = "0.1.0"
