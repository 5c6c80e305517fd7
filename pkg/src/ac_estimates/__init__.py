"""Numerical companion for logarithmic gradient estimates and Liouville
theorems of positive solutions to Delta u + a u^s - b u^t = 0 on
rotationally symmetric (warped-product) manifolds."""

__version__ = "0.1.0"

from .constants import A_of, N_of, golden_section, harnack_global_bound, j_decay, local_gradient_bound
from .equations import EquationSpec, classify, equilibrium, select_beta
from .geometry import WarpedGeometry, ricci_lower_bound
from .integral_curvature import k_quantity, solve_j_equation
from .solver import NewtonConfig, RadialGrid, newton_solve_radial, solve_closed_sphere, solve_polar

__all__ = [
    "A_of", "N_of", "golden_section", "harnack_global_bound", "j_decay", "local_gradient_bound",
    "EquationSpec", "classify", "equilibrium", "select_beta",
    "WarpedGeometry", "ricci_lower_bound",
    "k_quantity", "solve_j_equation",
    "NewtonConfig", "RadialGrid", "newton_solve_radial", "solve_closed_sphere", "solve_polar",
]
