"""Grid-based numerical ground truth for the analytic bounds."""
from .checks import (InequalityCheck, JohnsenCheck, johnsen_check_1d, verify_bl, verify_cordero,
                     verify_second_order_1d, verify_variance_identity_1d, weighted_gap_on_grid)
from .operator import (DEFAULT_GRIDS, DiscreteOperator, Grid, SpectrumResult, default_grid, discretize,
                       lowest_eigs, richardson, schrodinger_operator, spectral_gap, spectrum)
from .poisson import PoissonSolution, projected_cg, solve_poisson
from .quadrature import covariance, grid_gradient, integrate, variance, weighted_mean_mS

__all__ = [
    "DEFAULT_GRIDS", "DiscreteOperator", "Grid", "InequalityCheck", "JohnsenCheck", "PoissonSolution",
    "SpectrumResult", "covariance", "default_grid", "discretize", "grid_gradient", "integrate",
    "johnsen_check_1d", "lowest_eigs", "projected_cg", "richardson", "schrodinger_operator",
    "solve_poisson", "spectral_gap", "spectrum", "variance", "verify_bl", "verify_cordero",
    "verify_second_order_1d", "verify_variance_identity_1d", "weighted_gap_on_grid",
    "weighted_mean_mS",
]
