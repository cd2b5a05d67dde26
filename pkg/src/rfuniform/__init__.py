"""Exact asymptotics and Monte Carlo for uniform convergence in random
feature regression: Lagrangian curves for the sup-gap and interpolating
families, min-norm interpolator risk, their dual norm-ball bounds, kernel
limits, and the finite-size simulation protocol that validates them."""

from .activation import ActivationProfile, activation_by_name, centered, hermite_coeffs
from .analysis import compare_theory_sim, powerlaw_slope
from .asymptotics import (ModelParams, alpha_curve, dual_value, kernel_limit,
                          point_at_lambda, risk_min_norm, tbar_point, ubar_point)
from .fixedpoint import (GeneralQ, RiskNu, Tbar, Ubar, evaluate_Xi,
                         iterate_once, solve_at, solve_at_zero)
from .simulator import (SimInstance, empirical_log_det, maximizer_T,
                        maximizer_U, min_norm_interpolator, replicate_run,
                        risks, sample_instance)

__version__ = "0.1.0"
