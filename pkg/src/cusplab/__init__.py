"""cusplab: Bergman kernels on punctured Riemann surfaces with Poincare cusps.

A numerical laboratory built around the explicit orthonormal basis of the
weighted punctured disc and a concrete two-cusp surface on P^1, exposing
the kernel quotient, its derivatives, the cut-off basis machinery, the
Fubini-Study pullback comparison, and random-section zero statistics.
"""

__version__ = "0.1.0"

from .errors import (CuspLabError, CurvatureError, DegenerateDimensionError,
                     DifferentiationInstabilityError, DomainError,
                     EmptyScheduleError, InvalidIntervalError, MatchingError,
                     QuadratureError, RankDeficiencyError, RootPolishError,
                     SeriesTruncationError)
from .numerics import (LogReal, QuadratureRule, adaptive_gauss, gauss_rule,
                       gamma_weighted_log_integral, log_add, log_factorial,
                       log_integral, log_reg_gamma_lower, log_reg_gamma_upper,
                       reg_gamma_lower, reg_gamma_upper, signed_log_sum,
                       stirling_ratio)
from .discmodel import (KernelEvaluation, KodairaPoint, ModelBasis,
                        model_coeff, model_kernel_diag, model_kernel_offdiag,
                        model_kodaira, model_norm_restricted)
from .surface import (GramData, Perturbation, RadialPotential, SurfaceModel,
                      build_surface, dimension, global_kernel,
                      global_kernel_offdiag, gram_matrix, log_section_norms,
                      norm_deviations, section_norm)
from .basislab import (Cutoff, OrthoBasis, TruncationSchedule,
                       coefficient_tail_bound, cutoff_eval, epsilon_matrix,
                       head_norm_defect, kodaira_laplacian_apply,
                       laplacian_decay_check, laplacian_norm, head_closeness_report,
                       minimal_power_for_head, project_and_orthonormalize,
                       truncated_section)
from .geometry import (CuspComparison, QuotientScan, ZeroEnsemble, eta_p,
                       eta_zero_limit, fitted_loglog_slope, fs_current_pairing,
                       fs_pullback, quotient, quotient_derivative,
                       quotient_perturbed, quotient_scan, sample_sections,
                       zero_mass_conservation, zero_statistics)
