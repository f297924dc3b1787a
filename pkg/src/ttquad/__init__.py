"""Multivariate integration via tensor-train cross approximation."""

from .baselines import dense_weighted_sum, monte_carlo, random_exact_tt
from .exceptions import BudgetExhausted, DimensionError, NonFiniteError, NumericalError, SizeError
from .integrator import Integrand, IntegrationConfig, IntegrationReport, grid_point, integrate
from .matrix_cross import BlackBoxMatrix, CrossResult, cross_approximate, tau_pseudoinverse
from .quadrature import ProductGrid, QuadratureRule1D, Substitution, gauss_legendre, make_grid, transform_rule
from .tensor_train import (
    TTTensor,
    tt_contract_rank1,
    tt_diff_norm,
    tt_dot,
    tt_element,
    tt_from_rank1,
    tt_norm,
    tt_to_dense,
)
from .tt_cross import BlackBoxTensor, BudgetPolicy, effective_tolerance, tt_cross

__version__ = "0.1.0"
