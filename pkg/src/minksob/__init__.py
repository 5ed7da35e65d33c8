"""Numerical verification of Sobolev inequalities on spacelike submanifolds
of Minkowski space, with the transport (ABP) construction behind them."""
from .errors import *  # noqa: F401,F403
from .lorentz import causal_class, mink_inner, mink_norm, unit_ball_volume
from .mesh import SpacelikeMesh, is_mean_convex, maximal_slope
from .generators import build_density, build_surface, parse_density_spec, parse_surface_spec
from .pde import DensityField, normalize_density, solve_neumann, solve_variant
from .abp import asymptotic_constant, estimate_volume_A, inclusion_check, region_A_contains
from .verify import VerificationReport, constant_C, evaluate_inequality, fuzz
from .estimators import ABPVolumeEstimator, NeumannSolver, SobolevVerifier, TransportMap

__version__ = "0.1.0"
