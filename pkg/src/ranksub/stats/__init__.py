"""Application test statistics pluggable into the subsampling engine."""

from .splitmean import SplitMeanConfig, split_mean_statistic, make_split_mean_statistic
from .dip import dip_statistic
from .hunting import two_means_direction, dip_hunt_pvalue, make_dip_hunt_statistic
from .verma import (
    TrialDataset,
    RejectionPlan,
    LogisticFit,
    fit_logistic,
    rejection_mask,
    rejection_sample,
    verma_rejection_plan,
    permutation_pvalue_cov,
    median_heuristic,
    mmd_sq,
    permutation_pvalue_mmd,
    ipw_statistic,
    ipw_pvalue,
    verma_pvalue,
    gen_trial_data,
    true_propensity,
    fitted_propensity,
    make_verma_statistic,
    make_ipw_statistic,
)

__all__ = [
    "SplitMeanConfig",
    "split_mean_statistic",
    "make_split_mean_statistic",
    "dip_statistic",
    "two_means_direction",
    "dip_hunt_pvalue",
    "make_dip_hunt_statistic",
    "TrialDataset",
    "RejectionPlan",
    "LogisticFit",
    "fit_logistic",
    "rejection_mask",
    "rejection_sample",
    "verma_rejection_plan",
    "permutation_pvalue_cov",
    "median_heuristic",
    "mmd_sq",
    "permutation_pvalue_mmd",
    "ipw_statistic",
    "ipw_pvalue",
    "verma_pvalue",
    "gen_trial_data",
    "true_propensity",
    "fitted_propensity",
    "make_verma_statistic",
    "make_ipw_statistic",
]
