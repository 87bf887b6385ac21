"""Pointwise confidence intervals for isotonic regression and monotone models."""

from .ci import (
    ConfidenceInterval,
    CriticalValueTable,
    adjusted_critical_value,
    default_critical_values,
    max_min_only_ci,
    oracle_ci,
    pivotal_ci,
    smooth_proxy,
)
from .design import Block, BlockSumTable, DesignGrid, Sample, block_mean, build_tables, candidate_corners, read_sample_csv
from .exprs import Expression
from .isotonic import (
    BlockFit,
    WeightedSeries,
    block_fit,
    block_max_min,
    block_min_max,
    fit_at_design_points,
    pava,
    weighted_isotonic_max_min,
)
from .lrt import LRTResult, constrained_isotonic, lrt_ci, lrt_statistic
from .models import (
    BERNOULLI,
    GAUSSIAN,
    POISSON,
    CurrentStatusData,
    GlmFamily,
    GrenanderFit,
    PanelCountData,
    current_status_ci,
    glm_isotonic_ci,
    grenander_ci,
    grenander_fit,
    panel_count_ci,
)
from .simulate import (
    QuantileEstimate,
    SimConfig,
    run_replication,
    simulate_D_quantile,
    simulate_pivot_quantile,
)
from .variance import VarianceEstimate, difference_variance, local_block_variance

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockFit",
    "BlockSumTable",
    "ConfidenceInterval",
    "CriticalValueTable",
    "CurrentStatusData",
    "DesignGrid",
    "Expression",
    "GlmFamily",
    "GrenanderFit",
    "LRTResult",
    "PanelCountData",
    "QuantileEstimate",
    "Sample",
    "SimConfig",
    "VarianceEstimate",
    "WeightedSeries",
    "BERNOULLI",
    "GAUSSIAN",
    "POISSON",
    "adjusted_critical_value",
    "block_fit",
    "block_max_min",
    "block_mean",
    "block_min_max",
    "build_tables",
    "candidate_corners",
    "constrained_isotonic",
    "current_status_ci",
    "default_critical_values",
    "difference_variance",
    "fit_at_design_points",
    "glm_isotonic_ci",
    "grenander_ci",
    "grenander_fit",
    "local_block_variance",
    "lrt_ci",
    "lrt_statistic",
    "max_min_only_ci",
    "oracle_ci",
    "panel_count_ci",
    "pava",
    "pivotal_ci",
    "read_sample_csv",
    "run_replication",
    "simulate_D_quantile",
    "simulate_pivot_quantile",
    "smooth_proxy",
    "weighted_isotonic_max_min",
]
