"""Diffusions reflected at an elastic, local-time dependent boundary.

Simulation by the eps-jump scheme, Laplace transforms of hitting times and
inverse local times, Monte Carlo convergence studies and the liquidation
proceeds functional.
"""
from .errors import (AnchorDivergence, BoundaryOrder, DescendingHit, DomainExit,
                     ElasticReflectError, EmptyDomain, EmptySamples, ExcessiveJumps,
                     MethodUnavailable, NegativeLocalTime, NonHittingDrift, NonPositive,
                     NonPositiveVolatility, NonRecurrentModel, NumericalError, OutOfDomain,
                     QuadratureFailure, ValidationError)
from .laplace import (LaplaceQuery, LaplaceResult, closed_form_lt, discrete_lt,
                      discrete_lt_product, evaluate, limit_lt)
from .liquidation import (ImpactFunction, LiquidationProblem, continuous_proceeds,
                          discrete_proceeds, proceeds_report)
from .model import (BoundarySpec, DiffusionModel, ValidatedModel, eval_boundary,
                    eval_coefficients, eval_generator_residual, validate_model)
from .montecarlo import (ComparisonResult, ConvergenceReport, ConvergenceRung,
                         convergence_study, estimate_lt, pathwise_comparison,
                         pathwise_comparison_check)
from .phi_solver import (LogDerivativeSolver, get_solver, hitting_lt, log_derivative,
                         log_derivative_integral)
from .simulator import (ReflectedPath, SchemeConfig, sample_hitting_time,
                        sample_inverse_local_time, sample_inverse_local_times,
                        simulate_reflected_path)

__version__ = "0.1.0"

__all__ = [
    "AnchorDivergence", "BoundaryOrder", "BoundarySpec", "ComparisonResult",
    "ConvergenceReport", "ConvergenceRung", "DescendingHit", "DiffusionModel", "DomainExit",
    "ElasticReflectError", "EmptyDomain", "EmptySamples", "ExcessiveJumps", "ImpactFunction",
    "LaplaceQuery", "LaplaceResult", "LiquidationProblem", "LogDerivativeSolver",
    "MethodUnavailable", "NegativeLocalTime", "NonHittingDrift", "NonPositive",
    "NonPositiveVolatility", "NonRecurrentModel", "NumericalError", "OutOfDomain",
    "QuadratureFailure", "ReflectedPath", "SchemeConfig", "ValidatedModel", "ValidationError",
    "closed_form_lt", "continuous_proceeds", "convergence_study", "discrete_lt",
    "discrete_lt_product", "discrete_proceeds", "estimate_lt", "eval_boundary",
    "eval_coefficients", "eval_generator_residual", "evaluate", "get_solver", "hitting_lt",
    "limit_lt", "log_derivative", "log_derivative_integral", "pathwise_comparison",
    "pathwise_comparison_check", "proceeds_report", "sample_hitting_time",
    "sample_inverse_local_time", "sample_inverse_local_times", "simulate_reflected_path",
    "validate_model",
]
