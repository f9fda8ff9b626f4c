"""Exact worst-case rates of gradient descent and the multiplier certificates behind them."""

from .certificate import Certificate, build_S, certify, closed_form_decomposition
from .gdlab import (
    FunctionOracle,
    GDTrace,
    huber_tight_instance,
    quadratic_instance,
    random_quadratic_instance,
    run_gd,
)
from .lam import LambdaMultipliers, check_lambda, nu_to_lambda
from .nu import NuMultipliers, build_nu, check_nu
from .rates import (
    EffectiveParameters,
    ProblemSpec,
    RateResult,
    effective_parameters,
    eval_E,
    eval_F,
    eval_T,
    gamma_star,
    tau,
)
from .verifier import (
    interpolation_gap,
    verify_F_inequality,
    verify_G_inequality,
    verify_G_modified,
)

__all__ = [
    "Certificate",
    "EffectiveParameters",
    "FunctionOracle",
    "GDTrace",
    "LambdaMultipliers",
    "NuMultipliers",
    "ProblemSpec",
    "RateResult",
    "build_S",
    "build_nu",
    "certify",
    "check_lambda",
    "check_nu",
    "closed_form_decomposition",
    "effective_parameters",
    "eval_E",
    "eval_F",
    "eval_T",
    "gamma_star",
    "huber_tight_instance",
    "interpolation_gap",
    "nu_to_lambda",
    "quadratic_instance",
    "random_quadratic_instance",
    "run_gd",
    "tau",
    "verify_F_inequality",
    "verify_G_inequality",
    "verify_G_modified",
]
