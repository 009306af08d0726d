"""Estimation of ordered-category populations from rank-augmented samples.

The package covers the full workflow: drawing judgment post-stratified
samples (synthetic rankers or bootstrap from a finite population), the
estimator family (stratum averaging, constrained maximum likelihood,
isotonized variants with empty-stratum imputation, multi-ranker blends, and
a regression-trained ranker), a reproducible Monte-Carlo harness, and CSV
data plumbing with a command-line front end.
"""

from .estimators import (
    MlOptions,
    estimate_iso_combined,
    estimate_iso_drop_empty,
    estimate_iso_maxmin,
    estimate_iso_minmax,
    estimate_iso_no_empty,
    estimate_ml,
    estimate_srs,
    estimate_standard_jps,
    isotonize_with_imputation,
    log_likelihood,
    tabulate,
)
from .harness import (
    METHOD_TAGS,
    Scenario,
    ScenarioResult,
    replication_streams,
    run_grid,
    run_replication,
    run_scenario,
)
from .kernels import (
    BACKEND,
    available_backends,
    order_stat_category_pmf,
    pava_non_increasing,
    regularized_incomplete_beta,
)
from .multiranker import (
    OlrModel,
    RankerWeights,
    estimate_reg,
    estimate_sm,
    estimate_sm_star,
    fit_olr,
    membership_matrix,
    olr_loglik,
    olr_score,
    ranker_weights,
)
from .sampling import (
    CONDITIONING_SCHEMES,
    BootstrapJpsSampler,
    ConditioningExhausted,
    FreshUnitPool,
    InfiniteJpsSampler,
    PopulationPool,
    RankerSpec,
    bootstrap_population,
    condition_sample,
    draw_jps,
    draw_jps_multi,
    draw_srs,
    gen_concomitant,
)
from .types import (
    EstimateResult,
    FinitePopulation,
    JpsSample,
    MultiRankerSample,
    OrdinalDistribution,
    StratumCounts,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND",
    "CONDITIONING_SCHEMES",
    "METHOD_TAGS",
    "BootstrapJpsSampler",
    "ConditioningExhausted",
    "EstimateResult",
    "FinitePopulation",
    "FreshUnitPool",
    "InfiniteJpsSampler",
    "JpsSample",
    "MlOptions",
    "MultiRankerSample",
    "OlrModel",
    "OrdinalDistribution",
    "PopulationPool",
    "RankerSpec",
    "RankerWeights",
    "Scenario",
    "ScenarioResult",
    "StratumCounts",
    "available_backends",
    "bootstrap_population",
    "condition_sample",
    "draw_jps",
    "draw_jps_multi",
    "draw_srs",
    "estimate_iso_combined",
    "estimate_iso_drop_empty",
    "estimate_iso_maxmin",
    "estimate_iso_minmax",
    "estimate_iso_no_empty",
    "estimate_ml",
    "estimate_reg",
    "estimate_sm",
    "estimate_sm_star",
    "estimate_srs",
    "estimate_standard_jps",
    "fit_olr",
    "gen_concomitant",
    "isotonize_with_imputation",
    "log_likelihood",
    "membership_matrix",
    "olr_loglik",
    "olr_score",
    "order_stat_category_pmf",
    "pava_non_increasing",
    "ranker_weights",
    "regularized_incomplete_beta",
    "replication_streams",
    "run_grid",
    "run_replication",
    "run_scenario",
    "tabulate",
]
