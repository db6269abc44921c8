from .entropy import auto_spacing, marginal_entropy
from .estimator import (
    CostModel,
    CostTerms,
    HammersteinInverse,
    InversionConfig,
    InversionTrace,
    cost_terms,
    estimate_inverse,
    filter_log_gain,
    init_inverse,
    inversion_cost,
    mean_log_derivative,
)
from .monotone import MonotoneMap

__all__ = [
    "auto_spacing",
    "marginal_entropy",
    "CostModel",
    "CostTerms",
    "HammersteinInverse",
    "InversionConfig",
    "InversionTrace",
    "cost_terms",
    "estimate_inverse",
    "filter_log_gain",
    "init_inverse",
    "inversion_cost",
    "mean_log_derivative",
    "MonotoneMap",
]
