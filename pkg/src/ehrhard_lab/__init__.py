"""Numerical laboratory for sup-convolution functional inequalities of
Brunn-Minkowski/Ehrhard type: PDI verification, direct grid evaluation,
counterexample search, measure audits, and the corner obstacle problem."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegeneratePointError, DomainError, EvaluationError,
                     HalfPlaneError, LabError, ParameterError, PositivityError,
                     PreconditionError, PrecisionError, RegimeError)
from .gaussian import (IntegralResult, MeasureSpec, density_measure, general_gaussian,
                       integrate, measure_mean_and_variance, standard_gaussian,
                       std_normal_cdf, std_normal_pdf, std_normal_quantile)
from .measures import (PotentialV, audit_measure, even_rigidity_check, gaussian_potential,
                       isoperimetric_profile, make_potential, quartic_potential,
                       vprime_convexity_and_slopes, vprime_subadditive)
from .necessity import (Counterexample, HDerivs, PerturbationParams, argmax_x0, clamp_phi,
                        counterexample_search, mean_constraint_check, perturbed_pair,
                        psi_closed_form, quad_form_necessity)
from .obstacle import (GridSurface, ObstacleProblem, dominance_check, feasible_init,
                       lower_bound_certificate, product_init, solve)
from .pdi import (PDIReport, WeightPair, block_condition, check_degenerate,
                  check_pdi_grid, classify_homogeneous, concave_ma_check,
                  elliptic_params, pdi_value, weight_constraint)
from .supconv import (GapResult, GridFunction, GridFunction2D, gap_scale, inequality_gap,
                      lp_smoothed_lhs, sup_convolve, tensorize_gap)
from .surfaces import (SurfaceH, affine_transform, catalog_ids, from_catalog, make_ehrhard,
                       make_minkowski, make_mp_mean, make_neg_quartic, make_pl_family,
                       make_power, make_sqrt_norm, make_young, minkowski_valid,
                       surface_max, young_valid)
