"""Two-orbit retrial queue with join-the-shortest-orbit routing.

Exact stationary distribution by the compensation method, cross-checked by a
truncated-chain linear solve and a discrete-event simulator.
"""

from .compensation import CompensationSeries, build_series, evaluate, field, measures, normalization
from .errors import (
    ConsistencyError,
    DegenerateParameterError,
    DomainError,
    EvaluationError,
    InstabilityError,
    InvalidParameterError,
    RetrialError,
    SolverError,
    TruncationError,
)
from .kernel import KernelRoots, asymptotic_roots
from .model import ModelParams, StationaryField, balance_residual, level_matrices, new_params, stability

__all__ = [
    "CompensationSeries",
    "ConsistencyError",
    "DegenerateParameterError",
    "DomainError",
    "EvaluationError",
    "InstabilityError",
    "InvalidParameterError",
    "KernelRoots",
    "ModelParams",
    "RetrialError",
    "SolverError",
    "StationaryField",
    "TruncationError",
    "asymptotic_roots",
    "balance_residual",
    "build_series",
    "evaluate",
    "field",
    "level_matrices",
    "measures",
    "new_params",
    "normalization",
    "stability",
]
