"""Rank-stability experiments over hierarchical forecast benchmarks.

Every experiment follows the same pattern: produce two (or more)
"equivalent" datasets, score all methods under each error measure on
each, turn the scores into rankings and report the Spearman correlation
between the rankings.  Equivalence comes from random half-splits of the
bottom series (cross-sectional), from the two halves of the test window
(temporal), or from collapsing everything to one point (total
aggregation).  Supporting experiments measure how much a benchmark moves
when forecasts are rescaled by per-method multipliers, and how much the
measures agree with one another on the full dataset.

All randomness flows from one master seed: split ``r`` uses the sub-seed
``derive_split_seed(seed, r)``, so runs are reproducible and splits are
independent of execution order.  Results are plain data and can be
serialised to JSON via each report's ``to_dict``.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .hierarchy import (
    HierarchicalDataset,
    PriceWeights,
    compute_price_weights,
    derive_split_seed,
    split_bottom_half,
    split_test_window,
    total_aggregate,
)
from .measures import (
    BaseMeasure,
    ForecastSet,
    MeasureError,
    MeasureSpec,
    Summarization,
    Weighting,
    abs_diff_scale,
    batch_errors,
    sq_diff_scale,
)
from .ranking import (
    DEGENERATE,
    Degenerate,
    Ranking,
    ReferenceRanking,
    correlation_or_flag,
    mean_correlation,
    rank_methods,
    spearman,
    top_k_subset,
)

log = logging.getLogger(__name__)

DEFAULT_N_SPLITS = 76
DEFAULT_PRICE_WINDOW = 28


class ExperimentError(RuntimeError):
    """Raised when an experiment cannot be set up as requested."""


def _weights_window(dataset: HierarchicalDataset, price_window: int) -> int:
    """Cap the dollar-sales window at the available training length."""
    return min(price_window, dataset.n)


# ---------------------------------------------------------------------------
# input normalisation
# ---------------------------------------------------------------------------

def as_method_dict(
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
) -> dict[str, ForecastSet]:
    if isinstance(forecasts, Mapping):
        return dict(forecasts)
    table = {}
    for fs in forecasts:
        if fs.method_id in table:
            raise ExperimentError(f"duplicate method id {fs.method_id!r}")
        table[fs.method_id] = fs
    return table


def as_specs(measures: Sequence[MeasureSpec | str]) -> list[MeasureSpec]:
    specs = [m if isinstance(m, MeasureSpec) else MeasureSpec.parse(m) for m in measures]
    labels = [spec.label for spec in specs]
    if len(set(labels)) != len(labels):
        raise ExperimentError(f"duplicate measure labels in {labels}")
    return specs


def _require_unique_names(specs: Sequence[MeasureSpec]) -> None:
    """Per-level tables are keyed by measure name, so names must be unique."""
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ExperimentError(f"duplicate measure names in {names}")


def _resolve_reference(
    reference: ReferenceRanking | None,
    methods: Sequence[str],
    top_ks: Sequence[int] | None,
) -> tuple[ReferenceRanking, list[int]]:
    if reference is None:
        ks = sorted(set(top_ks)) if top_ks else [len(methods)]
        if any(k < len(methods) for k in ks):
            raise ExperimentError(
                "top-K subsets below the full method count need a reference ranking"
            )
        reference = ReferenceRanking(tuple(methods))
    else:
        ks = sorted(set(top_ks)) if top_ks else [len(reference)]
    if ks[0] < 2:
        raise ExperimentError("top-K subsets need at least 2 methods")
    missing = [m for m in reference.method_ids if m not in set(methods)]
    if missing:
        raise ExperimentError(f"reference methods without forecasts: {missing[:5]}")
    if any(k > len(reference) for k in ks):
        raise ExperimentError("top-K larger than the reference ranking")
    return reference, ks


# ---------------------------------------------------------------------------
# scoring engine: evaluate every (method, measure) pair on one dataset
# ---------------------------------------------------------------------------

@dataclass
class DatasetScores:
    """Scores of all methods on one dataset, one entry per measure label.

    A label maps to None when the measure is undefined on this dataset
    (e.g. an entire level lost to zero scales under an unweighted scheme).
    """

    scores: dict[str, dict[str, float] | None]
    exclusions: dict[str, int]


@dataclass
class _LevelStats:
    """Per-level, per-base summaries for one method (internal)."""

    level_mean: np.ndarray      # unweighted mean over valid series, NaN if none
    n_valid: np.ndarray
    n_series: np.ndarray
    level_sum: np.ndarray       # sum over valid series (for pooled means)
    price_partial: np.ndarray   # sum of global-weight * error over valid series
    price_level_mean: np.ndarray  # sum of within-level renormalised weight * error


def _assemble(spec: MeasureSpec, stats: _LevelStats, k: int) -> float:
    """Collapse per-level summaries into one score; raises MeasureError if undefined."""
    scheme = spec.summarization
    priced = spec.weighting is Weighting.PRICE

    def level_value(j: int) -> float:
        if stats.n_valid[j - 1] == 0:
            raise MeasureError(f"{spec.label}: no series left at level {j}")
        if priced:
            return float(stats.price_level_mean[j - 1])
        return float(stats.level_mean[j - 1])

    if scheme.scheme == "single_level":
        if not 1 <= scheme.level <= k:
            raise MeasureError(f"{spec.label}: level {scheme.level} outside 1..{k}")
        return level_value(scheme.level)
    if scheme.scheme == "two_level_weighted":
        w = scheme.top_weight
        return w * level_value(1) + (1.0 - w) * level_value(k)
    if priced:
        # Weighted total over the whole hierarchy; excluded series drop
        # their weight mass, so partially excluded levels stay defined.
        return float(stats.price_partial.sum())
    if scheme.scheme == "per_level_average":
        if np.any(stats.n_valid == 0):
            empty = [j + 1 for j in range(k) if stats.n_valid[j] == 0]
            raise MeasureError(f"{spec.label}: no series left at level(s) {empty}")
        return float(stats.level_mean.mean())
    # pooled_average
    total_valid = int(stats.n_valid.sum())
    if total_valid == 0:
        raise MeasureError(f"{spec.label}: every series excluded")
    return float(stats.level_sum.sum() / total_valid)


class _EvalContext:
    """Method-independent per-level state for scoring one dataset.

    Holds the aggregated test actuals, the training-based scale
    denominators and the (renormalised) dollar-sales weight arrays, so
    repeated evaluations of different forecasts (methods, multiplier grid
    points) only pay for the error kernels.
    """

    def __init__(
        self,
        dataset: HierarchicalDataset,
        bases: Sequence[BaseMeasure],
        need_price: bool,
        weights: PriceWeights | None,
        price_window: int,
    ) -> None:
        self.dataset = dataset
        self.bases = list(bases)
        self.k = dataset.k
        need_scales = any(
            b in (BaseMeasure.MASE, BaseMeasure.RMSSE) for b in self.bases
        )
        if need_price and weights is None:
            weights = compute_price_weights(
                dataset, window_len=_weights_window(dataset, price_window)
            )
        self.need_price = need_price
        self.level_tests: list[np.ndarray] = []
        self.abs_scale: list[np.ndarray | None] = []
        self.sq_scale: list[np.ndarray | None] = []
        self.level_w: list[np.ndarray | None] = []
        self.level_rnorm: list[np.ndarray | None] = []
        for level in dataset.levels:
            self.level_tests.append(level.aggregate(dataset.test))
            if need_scales:
                train = level.aggregate(dataset.train)
                self.abs_scale.append(abs_diff_scale(train))
                self.sq_scale.append(sq_diff_scale(train))
            else:
                self.abs_scale.append(None)
                self.sq_scale.append(None)
            if need_price:
                sales = weights.level_sales[level.index - 1]
                level_total = float(sales.sum())
                self.level_w.append(weights.level_weights[level.index - 1])
                self.level_rnorm.append(
                    sales / level_total if level_total > 0 else sales * 0.0
                )
            else:
                self.level_w.append(None)
                self.level_rnorm.append(None)

    def aggregate_forecast(self, f_bottom: np.ndarray) -> list[np.ndarray]:
        return [level.aggregate(f_bottom) for level in self.dataset.levels]

    def stats(self, f_levels: Sequence[np.ndarray]) -> dict[BaseMeasure, _LevelStats]:
        k = self.k
        out = {
            base: _LevelStats(
                level_mean=np.full(k, np.nan),
                n_valid=np.zeros(k, dtype=int),
                n_series=np.zeros(k, dtype=int),
                level_sum=np.zeros(k),
                price_partial=np.zeros(k),
                price_level_mean=np.zeros(k),
            )
            for base in self.bases
        }
        for level in self.dataset.levels:
            j = level.index - 1
            for base in self.bases:
                values, valid = batch_errors(
                    base,
                    self.level_tests[j],
                    f_levels[j],
                    abs_scale=self.abs_scale[j],
                    sq_scale=self.sq_scale[j],
                )
                st = out[base]
                n_valid = int(valid.sum())
                st.n_series[j] = level.n_series
                st.n_valid[j] = n_valid
                if n_valid:
                    st.level_sum[j] = float(values[valid].sum())
                    st.level_mean[j] = st.level_sum[j] / n_valid
                if self.need_price:
                    st.price_partial[j] = float((self.level_w[j] * values)[valid].sum())
                    st.price_level_mean[j] = float(
                        (self.level_rnorm[j] * values)[valid].sum()
                    )
        return out

    def excluded_counts(self, stats: Mapping[BaseMeasure, _LevelStats]) -> dict[str, int]:
        return {
            base.value: int((stats[base].n_series - stats[base].n_valid).sum())
            for base in self.bases
        }


def evaluate_methods(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measures: Sequence[MeasureSpec | str],
    *,
    weights: PriceWeights | None = None,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> DatasetScores:
    """Score every method under every measure spec on one dataset.

    Aggregate-level forecasts are always derived bottom-up by summing the
    bottom-level forecasts.  Dollar-sales weights are computed from the
    dataset itself unless pre-computed ``weights`` are supplied (which
    must then come from a dataset with this exact level structure).
    ``price_window`` is capped at the training length so short synthetic
    datasets stay usable with the 28-day default.
    """
    methods = as_method_dict(forecasts)
    specs = as_specs(measures)
    bases = sorted({spec.base for spec in specs}, key=lambda b: b.value)
    need_price = any(spec.weighting is Weighting.PRICE for spec in specs)
    ctx = _EvalContext(dataset, bases, need_price, weights, price_window)

    method_stats: dict[str, dict[BaseMeasure, _LevelStats]] = {}
    excluded: dict[str, int] = {base.value: 0 for base in bases}
    for method_id, fs in methods.items():
        f_bottom = fs.matrix(dataset.bottom_ids)
        if f_bottom.shape[1] != dataset.h:
            raise ExperimentError(
                f"method {method_id!r}: horizon {f_bottom.shape[1]} != {dataset.h}"
            )
        method_stats[method_id] = ctx.stats(ctx.aggregate_forecast(f_bottom))
    if method_stats:
        # Exclusions depend on the dataset only, not on the forecasts.
        excluded = ctx.excluded_counts(next(iter(method_stats.values())))

    scores: dict[str, dict[str, float] | None] = {}
    for spec in specs:
        table: dict[str, float] = {}
        undefined = False
        for method_id in methods:
            try:
                table[method_id] = _assemble(
                    spec, method_stats[method_id][spec.base], ctx.k
                )
            except MeasureError as exc:
                log.warning("measure %s undefined: %s", spec.label, exc)
                undefined = True
                break
        scores[spec.label] = None if undefined else table
    return DatasetScores(scores=scores, exclusions=excluded)


def _correlate(
    scores_a: dict[str, float] | None,
    scores_b: dict[str, float] | None,
    reference: ReferenceRanking,
    top_k: int,
) -> float | None:
    if scores_a is None or scores_b is None:
        return None
    sub_a = top_k_subset(reference, top_k, scores_a)
    sub_b = top_k_subset(reference, top_k, scores_b)
    value = spearman(rank_methods(sub_a), rank_methods(sub_b))
    return correlation_or_flag(value)


# ---------------------------------------------------------------------------
# report containers
# ---------------------------------------------------------------------------

@dataclass
class StabilityCell:
    """Per-split correlations of one (measure, top-K) combination."""

    correlations: list[float | None] = field(default_factory=list)

    @property
    def mean(self) -> float | None:
        return mean_correlation(self.correlations)

    @property
    def n_flagged(self) -> int:
        return sum(1 for value in self.correlations if value is None)

    def to_dict(self) -> dict:
        return {
            "mean": "*" if self.mean is None else self.mean,
            "correlations": ["*" if v is None else v for v in self.correlations],
            "n_flagged": self.n_flagged,
        }


def _seed_audit(seed: int, n_splits: int) -> list[dict]:
    audit = []
    for i in range(n_splits):
        ss = derive_split_seed(seed, i)
        state = ss.generate_state(2)
        audit.append({"index": i, "state": [int(word) for word in state]})
    return audit


@dataclass
class StabilityReport:
    """Mean and per-split rank correlations per measure and top-K subset."""

    experiment: str
    n_splits: int
    master_seed: int
    top_ks: list[int]
    cells: dict[str, dict[int, StabilityCell]]
    exclusions: dict[str, list[int]]
    split_seeds: list[dict]

    def mean(self, measure: str, top_k: int) -> float | None:
        return self.cells[measure][top_k].mean

    def to_frame(self) -> pd.DataFrame:
        rows = {}
        for measure, by_k in self.cells.items():
            rows[measure] = {
                f"top_{k}": ("*" if cell.mean is None else cell.mean)
                for k, cell in by_k.items()
            }
        frame = pd.DataFrame.from_dict(rows, orient="index")
        frame.index.name = "measure"
        return frame

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "n_splits": self.n_splits,
            "master_seed": self.master_seed,
            "top_ks": self.top_ks,
            "measures": {
                measure: {f"top_{k}": cell.to_dict() for k, cell in by_k.items()}
                for measure, by_k in self.cells.items()
            },
            "excluded_series": self.exclusions,
            "split_seeds": self.split_seeds,
        }


@dataclass
class PerLevelStabilityReport:
    """Rank stability per hierarchical level (rows) and measure (columns)."""

    n_splits: int
    master_seed: int
    top_k: int
    cells: dict[int, dict[str, StabilityCell]]
    exclusions: dict[str, list[int]]
    split_seeds: list[dict]

    def mean(self, level: int, measure: str) -> float | None:
        return self.cells[level][measure].mean

    def to_frame(self) -> pd.DataFrame:
        rows = {}
        for level, by_measure in self.cells.items():
            rows[level] = {
                measure: ("*" if cell.mean is None else cell.mean)
                for measure, cell in by_measure.items()
            }
        frame = pd.DataFrame.from_dict(rows, orient="index")
        frame.index.name = "level"
        return frame

    def to_dict(self) -> dict:
        return {
            "experiment": "per_level_stability",
            "n_splits": self.n_splits,
            "master_seed": self.master_seed,
            "top_k": self.top_k,
            "levels": {
                str(level): {m: cell.to_dict() for m, cell in by_measure.items()}
                for level, by_measure in self.cells.items()
            },
            "excluded_series": self.exclusions,
            "split_seeds": self.split_seeds,
        }


@dataclass
class TemporalReport:
    """Rank correlations between the two halves of the test window."""

    cut: int
    top_k: int
    overall: dict[str, float | None]
    per_level: dict[int, dict[str, float | None]]
    exclusions: dict[str, int]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {"correlation": {m: ("*" if v is None else v) for m, v in self.overall.items()}}
        )
        frame.index.name = "measure"
        return frame

    def per_level_frame(self) -> pd.DataFrame:
        rows = {
            level: {m: ("*" if v is None else v) for m, v in by_measure.items()}
            for level, by_measure in self.per_level.items()
        }
        frame = pd.DataFrame.from_dict(rows, orient="index")
        frame.index.name = "level"
        return frame

    def to_dict(self) -> dict:
        return {
            "experiment": "temporal_stability",
            "cut": self.cut,
            "top_k": self.top_k,
            "overall": {m: ("*" if v is None else v) for m, v in self.overall.items()},
            "per_level": {
                str(level): {m: ("*" if v is None else v) for m, v in by_measure.items()}
                for level, by_measure in self.per_level.items()
            },
            "excluded_series": self.exclusions,
        }


@dataclass
class SweepCurve:
    """Stability of the two-level weighted measure along the weight grid."""

    top_k: int
    weights: list[float]
    cells: list[StabilityCell]

    def points(self) -> list[tuple[float, float | None]]:
        return [(w, cell.mean) for w, cell in zip(self.weights, self.cells)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "top_weight": self.weights,
                "stability": ["*" if cell.mean is None else cell.mean for cell in self.cells],
            }
        )

    def to_dict(self) -> dict:
        return {
            "top_k": self.top_k,
            "points": [
                {"top_weight": w, "stability": "*" if cell.mean is None else cell.mean,
                 "n_flagged": cell.n_flagged}
                for w, cell in zip(self.weights, self.cells)
            ],
        }


@dataclass
class SweepReport:
    base_measure: str
    n_splits: int
    master_seed: int
    curves: dict[int, SweepCurve]
    split_seeds: list[dict]

    def to_dict(self) -> dict:
        return {
            "experiment": "top_level_weight_sweep",
            "base_measure": self.base_measure,
            "n_splits": self.n_splits,
            "master_seed": self.master_seed,
            "curves": {f"top_{k}": curve.to_dict() for k, curve in self.curves.items()},
            "split_seeds": self.split_seeds,
        }


@dataclass
class MagicResult:
    """Per-method optimal multipliers and the adjusted-vs-raw rank similarity."""

    measure: str
    level: int
    multipliers: dict[str, float | None]
    similarity: float | None
    grid_size: int
    grid_min: float
    grid_max: float

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "level": self.level,
            "multipliers": {m: ("*" if c is None else c) for m, c in self.multipliers.items()},
            "similarity": "*" if self.similarity is None else self.similarity,
            "grid": {"size": self.grid_size, "min": self.grid_min, "max": self.grid_max},
        }


@dataclass
class MatrixReport:
    """Symmetric rank-similarity matrix between error measures."""

    labels: list[str]
    values: dict[str, dict[str, float | None]]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame.from_dict(
            {
                a: {b: ("*" if self.values[a][b] is None else self.values[a][b])
                    for b in self.labels}
                for a in self.labels
            },
            orient="index",
        )
        frame = frame.loc[self.labels, self.labels]
        frame.index.name = "measure"
        return frame

    def to_dict(self) -> dict:
        return {
            "experiment": "measure_similarity_matrix",
            "labels": self.labels,
            "matrix": {
                a: {b: ("*" if v is None else v) for b, v in row.items()}
                for a, row in self.values.items()
            },
        }


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def cross_sectional_stability(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measures: Sequence[MeasureSpec | str],
    n_splits: int = DEFAULT_N_SPLITS,
    seed: int = 0,
    top_ks: Sequence[int] | None = None,
    reference: ReferenceRanking | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> StabilityReport:
    """Average rank correlation between random bottom-level half-splits.

    For every split the bottom series are partitioned in two, each half is
    re-aggregated and re-weighted as a standalone dataset, every method is
    scored under every measure, and the half-vs-half rankings (within each
    top-K subset of ``reference``) are correlated.
    """
    if n_splits < 1:
        raise ExperimentError("n_splits must be >= 1")
    methods = as_method_dict(forecasts)
    specs = as_specs(measures)
    reference, ks = _resolve_reference(reference, list(methods), top_ks)

    cells = {
        spec.label: {k: StabilityCell() for k in ks} for spec in specs
    }
    exclusions: dict[str, list[int]] = {}
    for split_index in range(n_splits):
        sub_seed = derive_split_seed(seed, split_index)
        half_a, half_b = split_bottom_half(dataset, sub_seed)
        scores_a = evaluate_methods(half_a, methods, specs, price_window=price_window)
        scores_b = evaluate_methods(half_b, methods, specs, price_window=price_window)
        for base, count in scores_a.exclusions.items():
            exclusions.setdefault(base, []).append(count + scores_b.exclusions[base])
        for spec in specs:
            for k in ks:
                cells[spec.label][k].correlations.append(
                    _correlate(
                        scores_a.scores[spec.label],
                        scores_b.scores[spec.label],
                        reference,
                        k,
                    )
                )
    return StabilityReport(
        experiment="cross_sectional_stability",
        n_splits=n_splits,
        master_seed=seed,
        top_ks=ks,
        cells=cells,
        exclusions=exclusions,
        split_seeds=_seed_audit(seed, n_splits),
    )


def per_level_stability(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measures: Sequence[MeasureSpec | str],
    n_splits: int = DEFAULT_N_SPLITS,
    seed: int = 0,
    top_k: int | None = None,
    reference: ReferenceRanking | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> PerLevelStabilityReport:
    """Cross-sectional stability computed separately at every level."""
    if n_splits < 1:
        raise ExperimentError("n_splits must be >= 1")
    methods = as_method_dict(forecasts)
    base_specs = as_specs(measures)
    _require_unique_names(base_specs)
    reference, ks = _resolve_reference(
        reference, list(methods), None if top_k is None else [top_k]
    )
    k_subset = ks[0]
    k_levels = dataset.k

    level_specs = [
        spec.with_summarization(Summarization.single_level(j))
        for j in range(1, k_levels + 1)
        for spec in base_specs
    ]
    cells = {
        j: {spec.name: StabilityCell() for spec in base_specs}
        for j in range(1, k_levels + 1)
    }
    exclusions: dict[str, list[int]] = {}
    for split_index in range(n_splits):
        sub_seed = derive_split_seed(seed, split_index)
        half_a, half_b = split_bottom_half(dataset, sub_seed)
        scores_a = evaluate_methods(half_a, methods, level_specs, price_window=price_window)
        scores_b = evaluate_methods(half_b, methods, level_specs, price_window=price_window)
        for base, count in scores_a.exclusions.items():
            exclusions.setdefault(base, []).append(count + scores_b.exclusions[base])
        for j in range(1, k_levels + 1):
            for spec in base_specs:
                label = spec.with_summarization(Summarization.single_level(j)).label
                cells[j][spec.name].correlations.append(
                    _correlate(
                        scores_a.scores[label], scores_b.scores[label], reference, k_subset
                    )
                )
    return PerLevelStabilityReport(
        n_splits=n_splits,
        master_seed=seed,
        top_k=k_subset,
        cells=cells,
        exclusions=exclusions,
        split_seeds=_seed_audit(seed, n_splits),
    )


def total_aggregation_stability(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measures: Sequence[MeasureSpec | str],
    n_splits: int = DEFAULT_N_SPLITS,
    seed: int = 0,
    top_k: int | None = None,
    reference: ReferenceRanking | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> StabilityReport:
    """Cross-sectional stability after collapsing each half to one point.

    Each half's series and test days are summed into a single actual, and
    every method's bottom-level forecasts are summed the same way.  At
    this aggregation all measures except SMAPE are strictly increasing
    functions of the single absolute error, so they produce identical
    rankings per half.
    """
    if n_splits < 1:
        raise ExperimentError("n_splits must be >= 1")
    methods = as_method_dict(forecasts)
    base_specs = as_specs(measures)
    _require_unique_names(base_specs)
    reference, ks = _resolve_reference(
        reference, list(methods), None if top_k is None else [top_k]
    )
    k_subset = ks[0]

    # On the one-series collapsed dataset every scheme coincides; keep the
    # measure's own name for reporting.
    collapsed = [
        MeasureSpec(spec.base, spec.weighting, Summarization.per_level_average())
        for spec in base_specs
    ]
    labels = [spec.name for spec in base_specs]
    if len(set(labels)) != len(labels):
        raise ExperimentError("duplicate measure names after collapsing schemes")

    def collapse_forecasts(half: HierarchicalDataset, total: HierarchicalDataset):
        collapsed_sets = {}
        for method_id, fs in methods.items():
            point = float(fs.matrix(half.bottom_ids).sum())
            collapsed_sets[method_id] = ForecastSet(
                method_id, {total.bottom_ids[0]: np.array([point])}
            )
        return collapsed_sets

    cells = {label: {k_subset: StabilityCell()} for label in labels}
    exclusions: dict[str, list[int]] = {}
    for split_index in range(n_splits):
        sub_seed = derive_split_seed(seed, split_index)
        halves = split_bottom_half(dataset, sub_seed)
        totals = [total_aggregate(half) for half in halves]
        scored = []
        for half, total in zip(halves, totals):
            scored.append(
                evaluate_methods(
                    total,
                    collapse_forecasts(half, total),
                    collapsed,
                    price_window=price_window,
                )
            )
        for base, count in scored[0].exclusions.items():
            exclusions.setdefault(base, []).append(count + scored[1].exclusions[base])
        for spec, label in zip(collapsed, labels):
            cells[label][k_subset].correlations.append(
                _correlate(
                    scored[0].scores[spec.label],
                    scored[1].scores[spec.label],
                    reference,
                    k_subset,
                )
            )
    return StabilityReport(
        experiment="total_aggregation_stability",
        n_splits=n_splits,
        master_seed=seed,
        top_ks=[k_subset],
        cells=cells,
        exclusions=exclusions,
        split_seeds=_seed_audit(seed, n_splits),
    )


def temporal_stability(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measures: Sequence[MeasureSpec | str],
    cut: int,
    top_k: int | None = None,
    reference: ReferenceRanking | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> TemporalReport:
    """Rank correlation between the first and second part of the test window.

    Deterministic: the only datasets compared are the two windows either
    side of ``cut``.  Both share the full training history, so
    training-based scales are identical.  Reports the correlation under
    each measure's own summarisation plus a per-level breakdown.
    """
    methods = as_method_dict(forecasts)
    base_specs = as_specs(measures)
    _require_unique_names(base_specs)
    reference, ks = _resolve_reference(
        reference, list(methods), None if top_k is None else [top_k]
    )
    k_subset = ks[0]
    k_levels = dataset.k

    level_specs = [
        spec.with_summarization(Summarization.single_level(j))
        for j in range(1, k_levels + 1)
        for spec in base_specs
    ]
    all_specs = base_specs + [
        spec for spec in level_specs if spec.label not in {s.label for s in base_specs}
    ]

    first, second = split_test_window(dataset, cut)
    need_price = any(spec.weighting is Weighting.PRICE for spec in all_specs)
    weights = (
        compute_price_weights(dataset, window_len=_weights_window(dataset, price_window))
        if need_price
        else None
    )

    def window_forecasts(lo: int, hi: int) -> dict[str, ForecastSet]:
        return {
            method_id: ForecastSet(
                method_id, {sid: row[lo:hi] for sid, row in fs.forecasts.items()}
            )
            for method_id, fs in methods.items()
        }

    scores_1 = evaluate_methods(
        first, window_forecasts(0, cut), all_specs, weights=weights, price_window=price_window
    )
    scores_2 = evaluate_methods(
        second,
        window_forecasts(cut, dataset.h),
        all_specs,
        weights=weights,
        price_window=price_window,
    )

    overall = {
        spec.label: _correlate(
            scores_1.scores[spec.label], scores_2.scores[spec.label], reference, k_subset
        )
        for spec in base_specs
    }
    per_level: dict[int, dict[str, float | None]] = {}
    for j in range(1, k_levels + 1):
        per_level[j] = {}
        for spec in base_specs:
            label = spec.with_summarization(Summarization.single_level(j)).label
            per_level[j][spec.name] = _correlate(
                scores_1.scores[label], scores_2.scores[label], reference, k_subset
            )
    exclusions = {
        base: scores_1.exclusions[base] + scores_2.exclusions[base]
        for base in scores_1.exclusions
    }
    return TemporalReport(
        cut=cut,
        top_k=k_subset,
        overall=overall,
        per_level=per_level,
        exclusions=exclusions,
    )


# ---------------------------------------------------------------------------
# forecast multipliers ("magic numbers")
# ---------------------------------------------------------------------------

def magic_grid(points: int = 500, lo: float = 0.0, hi: float = 2.0) -> np.ndarray:
    """Equidistant multiplier grid including both endpoints."""
    if points < 1:
        raise ExperimentError("grid needs at least one point")
    return np.linspace(lo, hi, points)


def _magic_search(
    ctx: _EvalContext,
    f_bottom: np.ndarray,
    spec: MeasureSpec,
    grid: np.ndarray,
) -> tuple[float | Degenerate, float]:
    """Best multiplier and its score; flags an all-tied grid as degenerate.

    Multiplying every bottom forecast by ``c`` scales every aggregate by
    ``c`` as well, so the level aggregation is done once and only the
    error kernels re-run per grid point.
    """
    f_levels = ctx.aggregate_forecast(f_bottom)
    scores = []
    for c in grid:
        stats = ctx.stats([c * f for f in f_levels])
        scores.append(_assemble(spec, stats[spec.base], ctx.k))
    values = np.array(scores)
    if len(grid) > 1 and float(values.max()) == float(values.min()):
        return DEGENERATE, float(values[0])
    best = int(np.argmin(values))  # argmin takes the first (smallest c) on ties
    return float(grid[best]), float(values[best])


def optimal_magic_number(
    method_forecasts: ForecastSet,
    dataset: HierarchicalDataset,
    measure: MeasureSpec | str,
    grid: Sequence[float] | np.ndarray | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> float | Degenerate:
    """Grid-search the forecast multiplier that minimises ``measure``.

    All bottom-level forecasts are multiplied by the candidate ``c``;
    aggregates are re-derived by summation, so every level scales by the
    same factor.  Ties break toward the smallest ``c``; a grid on which
    every candidate scores identically carries no information and returns
    :data:`DEGENERATE`.  The multipliers are fit on the test period
    itself; this deliberate leakage is the point of the exercise.
    """
    spec = measure if isinstance(measure, MeasureSpec) else MeasureSpec.parse(measure)
    grid = magic_grid() if grid is None else np.asarray(sorted(grid), dtype=float)
    if grid.size == 0:
        raise ExperimentError("empty multiplier grid")
    ctx = _EvalContext(
        dataset, [spec.base], spec.weighting is Weighting.PRICE, None, price_window
    )
    c_star, _ = _magic_search(ctx, method_forecasts.matrix(dataset.bottom_ids), spec, grid)
    return c_star


def magic_number_similarity(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measure: MeasureSpec | str,
    level: int,
    grid: Sequence[float] | np.ndarray | None = None,
    top_k: int | None = None,
    reference: ReferenceRanking | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> MagicResult:
    """Rank similarity between multiplier-adjusted and raw rankings.

    Each method gets its own optimal multiplier for ``measure`` evaluated
    at hierarchy ``level``; the adjusted scores are re-ranked and compared
    against the unadjusted ranking.  When the adjusted scores all tie
    (e.g. every multiplier collapses the forecasts to zero), the
    comparison is flagged instead of reported as a number.
    """
    methods = as_method_dict(forecasts)
    base = measure if isinstance(measure, MeasureSpec) else MeasureSpec.parse(measure)
    spec = base.with_summarization(Summarization.single_level(level))
    grid = magic_grid() if grid is None else np.asarray(sorted(grid), dtype=float)
    if grid.size == 0:
        raise ExperimentError("empty multiplier grid")

    if reference is not None and top_k is not None:
        methods = {mid: methods[mid] for mid in top_k_subset(reference, top_k, methods)}
    elif top_k is not None and top_k < len(methods):
        raise ExperimentError("top-K below the method count needs a reference ranking")

    ctx = _EvalContext(
        dataset, [spec.base], spec.weighting is Weighting.PRICE, None, price_window
    )
    multipliers: dict[str, float | None] = {}
    adjusted: dict[str, float] = {}
    raw_table: dict[str, float] = {}
    for method_id, fs in methods.items():
        f_bottom = fs.matrix(dataset.bottom_ids)
        raw_table[method_id] = _assemble(
            spec, ctx.stats(ctx.aggregate_forecast(f_bottom))[spec.base], ctx.k
        )
        c_star, best = _magic_search(ctx, f_bottom, spec, grid)
        multipliers[method_id] = None if isinstance(c_star, Degenerate) else c_star
        adjusted[method_id] = best

    similarity = correlation_or_flag(
        spearman(rank_methods(adjusted), rank_methods(raw_table))
    )
    return MagicResult(
        measure=base.name,
        level=level,
        multipliers=multipliers,
        similarity=similarity,
        grid_size=int(grid.size),
        grid_min=float(grid.min()),
        grid_max=float(grid.max()),
    )


# ---------------------------------------------------------------------------
# measure agreement and aggregation-weight tradeoffs
# ---------------------------------------------------------------------------

def measure_similarity_matrix(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    measures: Sequence[MeasureSpec | str] | Mapping[str, MeasureSpec | str],
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> MatrixReport:
    """Pairwise rank similarity of the measures on the full dataset.

    ``measures`` may be a mapping of display label to spec, which allows
    the same measure to appear under two names.
    """
    methods = as_method_dict(forecasts)
    if isinstance(measures, Mapping):
        named = {
            label: (m if isinstance(m, MeasureSpec) else MeasureSpec.parse(m))
            for label, m in measures.items()
        }
    else:
        specs = as_specs(measures)
        named = {spec.label: spec for spec in specs}
    if len(named) < 2:
        raise ExperimentError("need at least 2 measures to compare")

    unique_specs = list({spec.label: spec for spec in named.values()}.values())
    result = evaluate_methods(dataset, methods, unique_specs, price_window=price_window)

    rankings: dict[str, Ranking | None] = {}
    for label, spec in named.items():
        table = result.scores[spec.label]
        rankings[label] = None if table is None else rank_methods(table)

    labels = list(named)
    values: dict[str, dict[str, float | None]] = {a: {} for a in labels}
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            if j < i:
                values[a][b] = values[b][a]
            elif i == j:
                values[a][b] = None if rankings[a] is None else 1.0
            else:
                if rankings[a] is None or rankings[b] is None:
                    values[a][b] = None
                else:
                    values[a][b] = correlation_or_flag(spearman(rankings[a], rankings[b]))
    return MatrixReport(labels=labels, values=values)


def top_level_weight_sweep(
    dataset: HierarchicalDataset,
    forecasts: Mapping[str, ForecastSet] | Sequence[ForecastSet],
    base_measure: MeasureSpec | str,
    w_grid: Sequence[float],
    n_splits: int = DEFAULT_N_SPLITS,
    seed: int = 0,
    top_ks: Sequence[int] | None = None,
    reference: ReferenceRanking | None = None,
    *,
    price_window: int = DEFAULT_PRICE_WINDOW,
) -> SweepReport:
    """Stability of the two-level weighted measure across top-level weights.

    For every ``w`` the score is ``w * top-level error + (1-w) *
    bottom-level error`` of the dollar-sales weighted base measure, and
    the cross-sectional stability experiment is repeated with identical
    split seeds, so curves differ only through ``w``.  The w=0 and w=1
    endpoints coincide with the bottom-only and top-only stabilities.
    """
    if n_splits < 1:
        raise ExperimentError("n_splits must be >= 1")
    methods = as_method_dict(forecasts)
    base = (
        base_measure
        if isinstance(base_measure, MeasureSpec)
        else MeasureSpec.parse(base_measure)
    )
    spec_base = MeasureSpec(base.base, Weighting.PRICE)
    reference, ks = _resolve_reference(reference, list(methods), top_ks)

    weights_grid = sorted({float(w) for w in w_grid})
    if not weights_grid:
        raise ExperimentError("empty weight grid")
    if weights_grid[0] < 0.0 or weights_grid[-1] > 1.0:
        raise ExperimentError("top-level weights must lie in [0, 1]")

    k_levels = dataset.k
    endpoint_specs = [
        spec_base.with_summarization(Summarization.single_level(1)),
        spec_base.with_summarization(Summarization.single_level(k_levels)),
    ]
    top_label, bottom_label = endpoint_specs[0].label, endpoint_specs[1].label

    curves = {
        k: SweepCurve(top_k=k, weights=weights_grid,
                      cells=[StabilityCell() for _ in weights_grid])
        for k in ks
    }
    for split_index in range(n_splits):
        sub_seed = derive_split_seed(seed, split_index)
        half_a, half_b = split_bottom_half(dataset, sub_seed)
        scores_a = evaluate_methods(half_a, methods, endpoint_specs, price_window=price_window)
        scores_b = evaluate_methods(half_b, methods, endpoint_specs, price_window=price_window)
        for w_index, w in enumerate(weights_grid):
            def blend(scores: DatasetScores) -> dict[str, float] | None:
                top = scores.scores[top_label]
                bottom = scores.scores[bottom_label]
                if top is None or bottom is None:
                    return None
                return {
                    mid: w * top[mid] + (1.0 - w) * bottom[mid] for mid in top
                }
            blended_a, blended_b = blend(scores_a), blend(scores_b)
            for k in ks:
                curves[k].cells[w_index].correlations.append(
                    _correlate(blended_a, blended_b, reference, k)
                )
    return SweepReport(
        base_measure=spec_base.name,
        n_splits=n_splits,
        master_seed=seed,
        curves=curves,
        split_seeds=_seed_audit(seed, n_splits),
    )
