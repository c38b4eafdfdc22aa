"""Lower bounds on the spectral gap and on lambda_{d+1} for log-concave measures, with grid oracles."""

__version__ = "0.1.0"

from .bounds import (AlphaBeta, BoundResult, WeightedMeasureSpec, alpha_beta, closed_form_inf_power,  # noqa: E402
                     cordero_bound, first_order_bound, gamma_constant, lambda_1_A, optimize_eps, prop41,
                     second_order_bound, weighted_gap, weighted_gaps, weighted_potential)
from .errors import *  # noqa: E402,F401,F403
from .intertwine import (ScalarField, apply_generator, carre_du_champ, check_intertwining,  # noqa: E402
                         curvature_matrix, inf_rho, intertwining_decay, symmetry_report)
from .model import (DiagonalWeight, Potential, custom_component, identity_weight, make_custom,  # noqa: E402
                    make_gaussian, make_power_product, make_product, make_weight, power_component,
                    quadratic_component, reweighted_potential)

__all__ = [
    "AlphaBeta", "BoundResult", "DiagonalWeight", "Potential", "ScalarField", "WeightedMeasureSpec",
    "alpha_beta", "apply_generator", "carre_du_champ", "check_intertwining", "closed_form_inf_power",
    "cordero_bound", "curvature_matrix", "custom_component", "first_order_bound", "gamma_constant",
    "identity_weight", "inf_rho", "intertwining_decay", "lambda_1_A", "make_custom", "make_gaussian",
    "make_power_product", "make_product", "make_weight", "optimize_eps", "power_component", "prop41",
    "quadratic_component", "reweighted_potential", "second_order_bound", "symmetry_report",
    "weighted_gap", "weighted_gaps", "weighted_potential",
]
