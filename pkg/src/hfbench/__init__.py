"""hfbench: hierarchical forecast benchmarking and rank-stability analysis."""

from .hierarchy import (
    M5_GROUPING,
    BottomSeries,
    HierarchicalDataset,
    HierarchyError,
    HierarchySpec,
    PriceWeights,
    TimeSeries,
    ZeroSalesError,
    build_hierarchy,
    compute_price_weights,
    derive_split_seed,
    split_bottom_half,
    split_test_window,
    total_aggregate,
)
from .measures import (
    DEFAULT_MEASURES,
    BaseMeasure,
    ForecastSet,
    MeasureError,
    MeasureSpec,
    SeriesError,
    Summarization,
    Weighting,
    ZeroScaleError,
    mae,
    mase,
    per_level_average,
    pooled_average,
    price_weighted_total,
    rmsse,
    smape,
    two_level_weighted,
    wape,
)
from .ranking import (
    DEGENERATE,
    Degenerate,
    Ranking,
    RankingError,
    ReferenceRanking,
    rank_methods,
    spearman,
    top_k_subset,
)
from .experiments import (
    ExperimentError,
    MagicResult,
    MatrixReport,
    PerLevelStabilityReport,
    StabilityReport,
    SweepReport,
    TemporalReport,
    cross_sectional_stability,
    evaluate_methods,
    magic_grid,
    magic_number_similarity,
    measure_similarity_matrix,
    optimal_magic_number,
    per_level_stability,
    temporal_stability,
    top_level_weight_sweep,
    total_aggregation_stability,
)
from .loaders import LoadError, LoadOptions, load_forecast_csv, load_long_csv, load_m5, load_manifest

__version__ = "0.1.0"

__all__ = [
    "M5_GROUPING",
    "BottomSeries",
    "HierarchicalDataset",
    "HierarchyError",
    "HierarchySpec",
    "PriceWeights",
    "TimeSeries",
    "ZeroSalesError",
    "build_hierarchy",
    "compute_price_weights",
    "derive_split_seed",
    "split_bottom_half",
    "split_test_window",
    "total_aggregate",
    "DEFAULT_MEASURES",
    "BaseMeasure",
    "ForecastSet",
    "MeasureError",
    "MeasureSpec",
    "SeriesError",
    "Summarization",
    "Weighting",
    "ZeroScaleError",
    "mae",
    "mase",
    "per_level_average",
    "pooled_average",
    "price_weighted_total",
    "rmsse",
    "smape",
    "two_level_weighted",
    "wape",
    "DEGENERATE",
    "Degenerate",
    "Ranking",
    "RankingError",
    "ReferenceRanking",
    "rank_methods",
    "spearman",
    "top_k_subset",
    "ExperimentError",
    "MagicResult",
    "MatrixReport",
    "PerLevelStabilityReport",
    "StabilityReport",
    "SweepReport",
    "TemporalReport",
    "cross_sectional_stability",
    "evaluate_methods",
    "magic_grid",
    "magic_number_similarity",
    "measure_similarity_matrix",
    "optimal_magic_number",
    "per_level_stability",
    "temporal_stability",
    "top_level_weight_sweep",
    "total_aggregation_stability",
    "LoadError",
    "LoadOptions",
    "load_forecast_csv",
    "load_long_csv",
    "load_m5",
    "load_manifest",
    "__version__",
]
