"""Power and minimal sample size for the F-test of a fixed factor in balanced ANOVA models."""

from .bounds import (
    PowerResult,
    WorstCaseInput,
    exact_power,
    extremal_effects,
    guaranteed_power,
    lambda_min,
    min_effect_sum,
)
from .catalog import (
    CATALOG,
    DesignPoint,
    TestPlan,
    VarianceSpec,
    lambda_exact,
    lookup,
    plan_for,
)
from .distributions import (
    FParams,
    central_f_cdf,
    central_f_quantile,
    noncentral_f_cdf,
    power_from_lambda,
)
from .errors import AnovaPowerError, InfeasibleError
from .formula import ModelSpec, parse_model
from .sizing import (
    SizeRequest,
    SizeResult,
    min_size,
    min_size_integer,
    min_size_real,
    pivot_parameter,
    power_table,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "AnovaPowerError",
    "DesignPoint",
    "FParams",
    "InfeasibleError",
    "ModelSpec",
    "PowerResult",
    "SizeRequest",
    "SizeResult",
    "TestPlan",
    "VarianceSpec",
    "WorstCaseInput",
    "central_f_cdf",
    "central_f_quantile",
    "exact_power",
    "extremal_effects",
    "guaranteed_power",
    "lambda_exact",
    "lambda_min",
    "lookup",
    "min_effect_sum",
    "min_size",
    "min_size_integer",
    "min_size_real",
    "noncentral_f_cdf",
    "parse_model",
    "pivot_parameter",
    "plan_for",
    "power_from_lambda",
    "power_table",
]
