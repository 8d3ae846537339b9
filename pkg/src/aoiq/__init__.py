"""Mean Age-of-Information toolkit for a sensor stream sharing a FCFS server
with Poisson background traffic, with closed-form bounds, a near-optimal
generation rate and an independent simulation oracle."""

from .bounds import (
    MomentSet,
    general_bounds_daley,
    minimize_mean_aoi,
    nbue_bounds,
    optimal_bound_value,
    optimal_rate,
)
from .busyperiod import BusyCoeffs, busy_coeffs, kendall_fixed_point, ybg_table
from .distributions import (
    Deterministic,
    Distribution,
    Erlang,
    Exponential,
    Hyperexponential,
    MixedErlang,
    from_mean_cv,
)
from .meanaoi import AoiReport, TruncationPolicy, mean_aoi
from .model import ModelSpec, StabilityError, make_model
from .phasetype import PhaseType, fit_two_moment
from .simulate import SimEstimate, replicate, simulate

__version__ = "0.1.0"

__all__ = [
    "AoiReport",
    "BusyCoeffs",
    "Deterministic",
    "Distribution",
    "Erlang",
    "Exponential",
    "Hyperexponential",
    "MixedErlang",
    "ModelSpec",
    "MomentSet",
    "PhaseType",
    "SimEstimate",
    "StabilityError",
    "TruncationPolicy",
    "busy_coeffs",
    "fit_two_moment",
    "from_mean_cv",
    "general_bounds_daley",
    "kendall_fixed_point",
    "make_model",
    "mean_aoi",
    "minimize_mean_aoi",
    "nbue_bounds",
    "optimal_bound_value",
    "optimal_rate",
    "replicate",
    "simulate",
    "ybg_table",
]
