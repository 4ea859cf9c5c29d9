"""Structured sparse plus low-rank VAR(1) network estimation."""

from .afnsl import CompositeConfig, afnsl_solve, composite_objective, ols_solve
from .estimator import StructuredVAR
from .evaluation import SUITES, evaluate, metrics
from .exceptions import (
    DivergenceError,
    NumericalError,
    ParameterError,
    SingularDesignError,
    StabilityError,
    StructVARError,
)
from .fnsl import Design, SolverConfig, SolveTrace, fnsl_solve
from .model import (
    GroupPartition,
    StructuredTransition,
    VarSample,
    make_transition,
    simulate_var,
)
from .stability import StabilityReport, diagnose, spectral_radius

__version__ = "0.1.0"

__all__ = [
    "CompositeConfig", "Design", "DivergenceError", "GroupPartition", "NumericalError",
    "ParameterError", "SUITES", "SingularDesignError", "SolveTrace", "SolverConfig",
    "StabilityError", "StabilityReport", "StructVARError", "StructuredTransition",
    "StructuredVAR", "VarSample", "afnsl_solve", "composite_objective", "diagnose",
    "evaluate", "fnsl_solve", "make_transition", "metrics", "ols_solve", "simulate_var",
    "spectral_radius",
]
