"""Exact numerical worlds for verifying the four estimator propositions."""

from .report import PropReport
from .gaussian import (
    GaussianModel,
    gaussian_gen,
    precision_graph_gen,
    masked_beta,
    two_stage_beta,
    prop1_check,
    pca_project,
    prop2_check,
    gaussian_cond_mi,
    sample_gaussian,
    lasso_cd,
    neighborhood_select,
)
from .discrete import (
    DiscreteLatentModel,
    discrete_gen,
    mix_with_uniform,
    discrete_exact,
    prop3_check,
    prop4_check,
    estimator_exact,
    TableModel,
)

__all__ = [
    "PropReport",
    "GaussianModel",
    "gaussian_gen",
    "precision_graph_gen",
    "masked_beta",
    "two_stage_beta",
    "prop1_check",
    "pca_project",
    "prop2_check",
    "gaussian_cond_mi",
    "sample_gaussian",
    "lasso_cd",
    "neighborhood_select",
    "DiscreteLatentModel",
    "discrete_gen",
    "mix_with_uniform",
    "discrete_exact",
    "prop3_check",
    "prop4_check",
    "estimator_exact",
    "TableModel",
]
