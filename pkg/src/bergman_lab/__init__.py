"""Numerical laboratory for family Bergman kernels on a sphere fibration.

Builds L2 section spaces of high tensor powers of a positive line bundle
over sphere fibers, assembles the two canonical connections on the
direct-image bundle over the parameter disk, and verifies the large-power
expansions of density and curvature diagonals against closed-form
coefficient predictions.
"""

from .asymptotics import ExpansionFit, OrderEstimate, fit, order_estimate
from .bergman import DiagonalSample, bergman_diag, density_integral, operator_diag
from .family import (HERMITIAN, HOLOMORPHIC, ConnectionMatrices,
                     CurvatureSample, chern_curvature_closed, connection,
                     curvature, curvature_sweep)
from .geometry import (AFFINE, INFINITY, OMEGA_ORTHOGONAL, PRODUCT,
                       FiberPoint, PositivityError, PotentialJet, Scenario,
                       ScenarioError, catalog, custom_scenario, fiber_density,
                       fiber_grid, horizontal_lift, jet, k_form,
                       laplace_fiber, omega_mixed, omega_pair,
                       scalar_curvature, scenario_list, tangent_curvature,
                       tension, weight_symbols)
from .hilbert import (ConditioningError, GramSystem, SectionBasis, basis,
                      dimension_check, gram, solve)
from .predictions import (CoefficientSet, coefficient_set, curvature_leading,
                          curvature_subleading, density_coeffs,
                          random_admissible_jet)
from .quadrature import QuadRule, build_rule, default_resolution, integrate

__version__ = "0.1.0"
