"""Numerical laboratory for Ricci flow on symmetry-reduced geometries.

Simulates the (modified) Ricci flow in warped-product and homogeneous
reductions and computes the metric-measure quantities behind local
curvature estimates: critical-exponent curvature integrals, noncollapsedness
moduli, the explicit parabolic sup bound, entropy monotonicity, and
Sobolev-constant brackets.
"""

from .analysis import (AnalysisGrid, BallStats, COARSE_GRID, DEFAULT_GRID,
                       ball_stats, ball_stats_state, bishop_gromov_ratio,
                       boundary_distance, diam, distance, kappa_modulus,
                       model_volume)
from .checkers import (EstimateVerdict, check_extensions, check_theorem_A,
                       check_theorem_B, check_theorem_C, point_pick)
from .constants import ConstantRegistry, constants
from .entropy import (build_fk, conjugate_evolve, monotonicity_check,
                      normalize_side, psi_delta, w_entropy, witness_search)
from .flow import (FlowTrajectory, ModifiedFlowSpec, convert_modified_to_ricci,
                   convert_ricci_to_modified, parabolic_rescale, ricci_residual,
                   run_flow, step_modified, step_ricci)
from .geometry import (CurvatureField, HomogeneousState, InvalidGeometryError,
                       WarpedProfile, curvature, curvature_homogeneous,
                       curvature_warped, flat_disk, hyperbolic_disk,
                       perturbed_sphere, round_sphere)
from .harness import ExperimentConfig, RunReport, run, sweep
from .moser import (MoserParams, MoserReport, curvature_subsolution_check,
                    moser_bound, sigma_n, solve_subsolution, verify_theorem)
from .sobolev import (SobolevReport, anderson_upper, croke_upper, cs2_from_cs,
                      injectivity_lower, rayleigh_lower, sobolev_bracket)

__version__ = "0.1.0"
