"""Simulation and analysis of one-dimensional stochastic Volterra equations."""
from .errors import (AccuracyWarning, DomainError, EstimationError, ParameterError, PreconditionError,
                     RangeError, RegularityWarning, SveError)
from .kernels import (ExpSumKernel, FractionalKernel, Kernel, KernelMeta, PropertyReport, ShiftedKernel,
                      TabulatedKernel, bernstein_truncate, check_nonneg_preserving, eval_kernel,
                      holder_params, kernel_from_record, modulus_l2, shift, soe_from_fractional)
from .mittag_leffler import (MlQuery, SignReport, asymptotic_threshold, frac_ou_mean,
                             laplace_identity_check, ml, ml_sign_scan)
from .model import (AssumptionReport, Clause, Coefficient, ComparabilityReport, InputCurve, SveProblem,
                    check_assumption, cir_coefficients, comparable_check, constant, eval_g,
                    fractional_ou_data, linear, mollify)
from .schemes import (BrownianDriver, PathEnsemble, SimConfig, brownian_increments, euler_maruyama,
                      simulate_coupled, simulate_euler, simulate_splitting)
from .analysis import (ComparisonReport, ConvergenceReport, CounterexampleReport, bound_components,
                       comparison_report, counterexample_report, empirical_holder,
                       modulus_of_continuity, resolvent_second_kind, strong_error, theta_formula)

__all__ = [
    "AccuracyWarning", "DomainError", "EstimationError", "ParameterError", "PreconditionError", "RangeError",
    "RegularityWarning", "SveError", "ExpSumKernel", "FractionalKernel", "Kernel", "KernelMeta",
    "PropertyReport", "ShiftedKernel", "TabulatedKernel", "bernstein_truncate", "check_nonneg_preserving",
    "eval_kernel", "holder_params", "kernel_from_record", "modulus_l2", "shift", "soe_from_fractional",
    "MlQuery", "SignReport", "asymptotic_threshold", "frac_ou_mean", "laplace_identity_check", "ml",
    "ml_sign_scan", "AssumptionReport", "Clause", "Coefficient", "ComparabilityReport", "InputCurve",
    "SveProblem", "check_assumption", "cir_coefficients", "comparable_check", "constant", "eval_g",
    "fractional_ou_data", "linear", "mollify", "BrownianDriver", "PathEnsemble", "SimConfig",
    "brownian_increments", "euler_maruyama", "simulate_coupled", "simulate_euler", "simulate_splitting",
    "ComparisonReport", "ConvergenceReport", "CounterexampleReport", "bound_components", "comparison_report",
    "counterexample_report", "empirical_holder", "modulus_of_continuity", "resolvent_second_kind",
    "strong_error", "theta_formula",
]

__version__ = "0.1.0"
