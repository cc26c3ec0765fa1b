"""Fluid ODE, stationary points, special functions and CR bounds."""

from .adversarial import (cr_bound_th1, cr_bound_th2, cr_bound_th2_detailed, solve_alpha,
                          z_total_closed_form, z_total_recurrence)
from .fluid import (OdeSolution, SingularityError, g_of, greedy_drift, integrate, ode_rhs,
                    sigma, wormald_bound)
from .special import BracketError, DomainError, adaptive_simpson, bisect, lambert_w, lambert_w_exp
from .stationary import (StationaryPoint, cr_limit, cr_lower_bound, mean_budget_formula,
                         stability_rate, stationary_z0, stationary_z0_K1, stationary_z0_Kinf)

__all__ = [
    "OdeSolution", "SingularityError", "StationaryPoint", "BracketError", "DomainError",
    "adaptive_simpson", "bisect", "cr_bound_th1", "cr_bound_th2", "cr_bound_th2_detailed",
    "cr_limit", "cr_lower_bound", "g_of", "greedy_drift", "integrate", "lambert_w",
    "lambert_w_exp", "mean_budget_formula", "ode_rhs", "sigma", "solve_alpha",
    "stability_rate", "stationary_z0", "stationary_z0_K1", "stationary_z0_Kinf",
    "wormald_bound", "z_total_closed_form", "z_total_recurrence",
]
