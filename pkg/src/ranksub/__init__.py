"""Derandomising randomised hypothesis tests by rank-transformed subsampling.

The engine aggregates many exchangeable realisations of a randomised test
statistic and calibrates the aggregate against subsampled copies whose
ranks have been pushed through the known null marginal.  Application
statistics (split-mean hunting, dip hunting, post-rejection-sampling
permutation tests, cross-fitted partially-linear-model estimation), merging
benchmarks and a seeded experiment harness are included.
"""

from .dist import (
    STD_NORMAL,
    UNIFORM01,
    EmpiricalCDF,
    NullMarginal,
    rank_transform,
    sample_covariance_matrix,
    sample_moments,
    std_normal_cdf,
    std_normal_quantile,
)
from .engine import (
    AGGREGATORS,
    MAX,
    MEAN,
    MIN,
    Aggregator,
    IndexTupleSet,
    RandomizedStatistic,
    TestReport,
    adaptive_test,
    aggregate_test,
    build_h_matrix,
    default_subsample_size,
    full_data_statistics,
    generate_tuples,
)
from .gaussloc import (
    GaussLocationModel,
    adversarial_pair,
    gauss_nonreplication,
    gauss_power,
    gen_exchangeable_gaussians,
)
from .merging import (
    MERGE_RULES,
    merge_arithmetic,
    merge_bonf_geom,
    merge_bonferroni,
    merge_geometric,
    tail_bound_cx,
    z_half_average_test,
)
from .dml import (
    DMLResult,
    PLMData,
    NuisanceLearner,
    cross_fit_theta,
    dml_interval,
    dml_point,
    gen_plm_data,
    knn_regressor,
    make_folds,
    rank_ci,
    sigma_ls,
    sigma_plugin,
    subsample_theta_matrix,
)
from .harness import (
    ExperimentConfig,
    RunRecord,
    gen_ball_mixture,
    gen_mean_test_data,
    gen_t_mixture,
    replication_probability,
    run_experiment,
)
from .streams import derive_int_seed, derive_rng
from . import stats

__version__ = "0.1.0"
