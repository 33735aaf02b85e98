"""Nonlocal Bellman equations of fractional order: evaluation, solving, diagnostics."""

from .closures import Closure, make_closure
from .errors import (ConfigurationError, DataError, FieldFormatError, MonotonicityError,
                     NonconvergenceError, RefinementError, ValidationError)
from .fields import ScalarField, average, from_closure, from_function, second_difference
from .fieldio import export_field, import_field
from .kernels import (ClassReport, EllipticityBounds, Kernel, classify_kernel,
                      kernel_from_descriptor, make_anisotropic_kernel,
                      make_log_wobble_kernel, make_power_kernel, make_radial_kernel,
                      regularize_kernel, scaled_power_kernel, smoothstep, symmetrize)
from .operators import (BellmanResult, EvalResult, evaluate_bellman, evaluate_linear,
                        evaluate_pucci, fractional_laplacian)
from .quadrature import QuadratureScheme, SamplePlan, field_plan, tail_bound
from .regularity import (HolderFit, MaskedKernel, PDecayProfile, PNReport,
                         RegularityReport, SweepReport, absolute_mass, compute_P_N,
                         compute_w_A, concavity_checks, diagnose_field, half_ball_plan,
                         holder_fit, p_decay_profile, pn_comparability, sigma_sweep)
from .solver import (BellmanProblem, ControlField, Solution, StencilSet, discretize,
                     policy_improvement, residual, solve_dirichlet,
                     solve_regularized_sequence)
from .symbol import ComparabilityFit, SymbolCurve, comparability_fit, symbol

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
