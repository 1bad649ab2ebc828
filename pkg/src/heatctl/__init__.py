"""Minimal-norm and time-optimal control of the 1D heat equation, distributed and sampled-data."""
from .errors import (
    ConfigurationError,
    ConstructionError,
    DomainError,
    HeatCtlError,
    NumericalError,
    PreconditionError,
    TargetError,
    ZeroMinimizer,
)
from .gramians import Gramian, SamplingGrid, continuous_gramian, sampled_gramian
from .minnorm import AdjointControl, NormSolution, SampledControl, solve_jp_continuous, solve_jp_sampled
from .spectral import BallTarget, DomainSpec, build_domain, exit_time, semigroup_apply
from .timeopt import TimeSolution, optimal_time_distributed, optimal_time_sampled

__version__ = "0.1.0"
