from .hull import HullDiameter, convex_hull_diameter
from .morphometrics import Morphometrics, morphometrics
from .pso import PsoConfig, PsoResult, pso_optimize
from .sir_ode import SirOdeParams, derive_rates, final_size, sample_trajectory, solve_sir_ode
from .timeseries import Sampler, TimeSeries

__all__ = [
    "HullDiameter",
    "Morphometrics",
    "PsoConfig",
    "PsoResult",
    "Sampler",
    "SirOdeParams",
    "TimeSeries",
    "convex_hull_diameter",
    "derive_rates",
    "final_size",
    "morphometrics",
    "pso_optimize",
    "sample_trajectory",
    "solve_sir_ode",
]
