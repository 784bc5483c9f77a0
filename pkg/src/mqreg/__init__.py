"""Multivariate quantile regression by sequential conditioning.

A target joint lower-orthant probability is factorized into per-stage
quantile levels; chained univariate pinball-loss regressions with
generated indicator regressors estimate the coefficients, and a grid of
factorizations traces the multivariate quantile curve.
"""

from .exceptions import (
    EstimationError,
    MqregError,
    SchemaError,
    ValidationError,
)
from .qr import (
    QrFit,
    QuantileLevel,
    SolverOptions,
    default_bandwidth,
    fit_qr,
    lp_oracle_fit,
    pinball_loss,
    smoothed_indicator,
    subgradient_check,
)
from .sequential import (
    DataMatrix,
    FactorizationPath,
    MqrFit,
    QuantileGraph,
    conditional_level,
    explicit_path,
    fit_mqr,
    fit_mqr_subsample,
    generated_regressors,
    grid_paths,
    predict,
    quantile_graph,
    quantile_graph_from_paths,
)
from .gaussian import (
    BvnParams,
    bvn_cdf,
    oracle_conditional_quantile,
    oracle_graph,
    std_normal_cdf,
    std_normal_quantile,
    truncated_normal_moments,
)
from .montecarlo import (
    DgpSpec,
    McCellResult,
    McConfig,
    conditional_joint_params,
    coverage_probability,
    dgp_sample,
    mc_cell,
    mc_table,
    parse_experiment_config,
)
from .bootstrap import BootstrapResult, bootstrap_mqr
from .varq import (
    ScenarioSpec,
    SeriesFrame,
    curve_fit_display,
    lag_design,
    log_diff,
    log_diff_columns,
    read_series_csv,
    varq_scenario_graphs,
)

__version__ = "0.1.0"
