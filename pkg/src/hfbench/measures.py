"""Forecast error measures, dollar-sales weighting and summarisation schemes.

Five base measures are supported, all defined per series over a test
window of length ``h`` with actuals ``Y`` and forecasts ``F``:

* ``MAE``    mean absolute error, ``(1/h) * sum |Y_t - F_t|``
* ``SMAPE``  ``(200/h) * sum |Y_t - F_t| / (|Y_t| + |F_t|)`` with a
  both-zero term counted as 0
* ``MASE``   MAE scaled by the in-sample mean absolute first difference
* ``RMSSE``  root mean squared error scaled by the in-sample mean squared
  first difference
* ``WAPE``   ``sum |Y_t - F_t| / sum |Y_t|``

A series whose scale denominator vanishes (constant history for
MASE/RMSSE, an all-zero test window for WAPE) raises
:class:`ZeroScaleError`; batch evaluation excludes such series and
reports the count.

Per-series errors are combined across a hierarchy either unweighted
(per-level average, pooled average, a single level, or a two-level
combination) or weighted by dollar sales, where series ``i`` contributes
``w_i * e_i`` with ``w_i = (1/k) * sales_i / sales_total``.  Weighted and
unweighted variants of the per-level schemes coincide at level 1, where
the only series carries its level's whole weight.
"""

from __future__ import annotations

import enum
import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .hierarchy import HierarchicalDataset, PriceWeights, TimeSeries


class MeasureError(ValueError):
    """Raised for malformed measure specs or unsatisfiable summaries."""


class ZeroScaleError(MeasureError):
    """A series' scale denominator is zero, so its error is undefined."""

    def __init__(self, series_id: str, detail: str) -> None:
        super().__init__(f"series {series_id!r}: {detail}")
        self.series_id = series_id


class BaseMeasure(str, enum.Enum):
    MAE = "MAE"
    SMAPE = "SMAPE"
    MASE = "MASE"
    RMSSE = "RMSSE"
    WAPE = "WAPE"

    def __str__(self) -> str:
        return self.value


class Weighting(str, enum.Enum):
    NONE = "none"
    PRICE = "price"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Summarization:
    """How per-series errors are collapsed into one score.

    ``per_level_average`` averages the per-level averages (every level
    counts the same, so aggregate series carry far more weight per
    series).  ``pooled_average`` is the plain mean over all series of all
    levels.  ``single_level`` restricts to one level.
    ``two_level_weighted`` blends the top and bottom level scores with a
    top-level weight in [0, 1].
    """

    scheme: str
    level: int | None = None
    top_weight: float | None = None

    _SCHEMES = ("per_level_average", "pooled_average", "single_level", "two_level_weighted")

    def __post_init__(self) -> None:
        if self.scheme not in self._SCHEMES:
            raise MeasureError(f"unknown summarization scheme {self.scheme!r}")
        if self.scheme == "single_level":
            if self.level is None or self.level < 1:
                raise MeasureError("single_level needs a level index >= 1")
        elif self.scheme == "two_level_weighted":
            if self.top_weight is None or not 0.0 <= self.top_weight <= 1.0:
                raise MeasureError("two_level_weighted needs a top weight in [0, 1]")

    @classmethod
    def per_level_average(cls) -> "Summarization":
        return cls("per_level_average")

    @classmethod
    def pooled_average(cls) -> "Summarization":
        return cls("pooled_average")

    @classmethod
    def single_level(cls, level: int) -> "Summarization":
        return cls("single_level", level=level)

    @classmethod
    def two_level_weighted(cls, top_weight: float) -> "Summarization":
        return cls("two_level_weighted", top_weight=top_weight)

    @property
    def label(self) -> str:
        if self.scheme == "single_level":
            return f"single_level({self.level})"
        if self.scheme == "two_level_weighted":
            return f"two_level_weighted({self.top_weight:g})"
        return self.scheme


_SPEC_RE = re.compile(
    r"^(?P<price>PRICE_)?(?P<base>MAE|SMAPE|MASE|RMSSE|WAPE)(?:/(?P<scheme>.+))?$"
)
_SCHEME_RE = re.compile(r"^(?P<name>[a-z_]+)(?:\((?P<arg>[^)]*)\))?$")


@dataclass(frozen=True)
class MeasureSpec:
    """A base measure plus weighting mode and summarisation scheme.

    Parsed from strings such as ``"MASE"``, ``"PRICE_RMSSE"``,
    ``"WAPE/pooled_average"``, ``"PRICE_MAE/single_level(1)"`` or
    ``"PRICE_RMSSE/two_level_weighted(0.05)"``.  The default scheme is
    the per-level average, which for dollar-sales weighting equals the
    weighted sum over all series of the hierarchy.
    """

    base: BaseMeasure
    weighting: Weighting = Weighting.NONE
    summarization: Summarization = Summarization("per_level_average")

    @property
    def name(self) -> str:
        prefix = "PRICE_" if self.weighting is Weighting.PRICE else ""
        return f"{prefix}{self.base.value}"

    @property
    def label(self) -> str:
        if self.summarization.scheme == "per_level_average":
            return self.name
        return f"{self.name}/{self.summarization.label}"

    @classmethod
    def parse(cls, text: str) -> "MeasureSpec":
        match = _SPEC_RE.match(text.strip())
        if match is None:
            raise MeasureError(f"cannot parse measure spec {text!r}")
        weighting = Weighting.PRICE if match.group("price") else Weighting.NONE
        base = BaseMeasure(match.group("base"))
        scheme_text = match.group("scheme")
        if scheme_text is None:
            return cls(base, weighting)
        scheme_match = _SCHEME_RE.match(scheme_text.strip())
        if scheme_match is None:
            raise MeasureError(f"cannot parse summarization {scheme_text!r}")
        name, arg = scheme_match.group("name"), scheme_match.group("arg")
        if name == "per_level_average":
            summarization = Summarization.per_level_average()
        elif name == "pooled_average":
            summarization = Summarization.pooled_average()
        elif name == "single_level":
            try:
                summarization = Summarization.single_level(int(arg))
            except (TypeError, ValueError):
                raise MeasureError("single_level needs an integer level argument") from None
        elif name == "two_level_weighted":
            try:
                summarization = Summarization.two_level_weighted(float(arg))
            except (TypeError, ValueError):
                raise MeasureError("two_level_weighted needs a numeric weight") from None
        else:
            raise MeasureError(f"unknown summarization scheme {name!r}")
        return cls(base, weighting, summarization)

    def with_summarization(self, summarization: Summarization) -> "MeasureSpec":
        return MeasureSpec(self.base, self.weighting, summarization)

    def __str__(self) -> str:
        return self.label


#: The measure battery used throughout the built-in experiments: the five
#: base measures plus the dollar-sales weighted variants of all but WAPE.
DEFAULT_MEASURES: tuple[str, ...] = (
    "MAE",
    "MASE",
    "RMSSE",
    "SMAPE",
    "WAPE",
    "PRICE_MAE",
    "PRICE_MASE",
    "PRICE_RMSSE",
    "PRICE_SMAPE",
)


@dataclass(frozen=True)
class SeriesError:
    """Error of one series under one base measure."""

    series_id: str
    level: int
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value < 0:
            raise MeasureError(
                f"series {self.series_id!r}: error value must be finite and >= 0"
            )


@dataclass(frozen=True)
class ForecastSet:
    """Per-method forecasts for every bottom series over the test horizon."""

    method_id: str
    forecasts: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        cleaned = {}
        h = None
        for sid, values in self.forecasts.items():
            row = np.asarray(values, dtype=float)
            if row.ndim != 1:
                raise MeasureError(f"{self.method_id}: forecast for {sid!r} is not 1-D")
            if h is None:
                h = row.size
            elif row.size != h:
                raise MeasureError(
                    f"{self.method_id}: forecast lengths differ ({sid!r})"
                )
            if not np.all(np.isfinite(row)):
                raise MeasureError(f"{self.method_id}: non-finite forecast for {sid!r}")
            cleaned[sid] = row
        if not cleaned:
            raise MeasureError(f"{self.method_id}: empty forecast set")
        object.__setattr__(self, "forecasts", cleaned)

    @property
    def h(self) -> int:
        return next(iter(self.forecasts.values())).size

    def matrix(self, bottom_ids: Iterable[str]) -> np.ndarray:
        """Stack forecasts into a matrix following ``bottom_ids`` order."""
        rows = []
        for sid in bottom_ids:
            if sid not in self.forecasts:
                raise MeasureError(
                    f"method {self.method_id!r} has no forecast for series {sid!r}"
                )
            rows.append(self.forecasts[sid])
        return np.vstack(rows)


# ---------------------------------------------------------------------------
# vectorised kernels (one row per series)
# ---------------------------------------------------------------------------

def abs_diff_scale(train: np.ndarray) -> np.ndarray:
    """Mean absolute first difference of each row's history."""
    return np.abs(np.diff(train, axis=1)).mean(axis=1)


def sq_diff_scale(train: np.ndarray) -> np.ndarray:
    """Mean squared first difference of each row's history."""
    return (np.diff(train, axis=1) ** 2).mean(axis=1)


def batch_errors(
    base: BaseMeasure,
    test: np.ndarray,
    forecast: np.ndarray,
    *,
    abs_scale: np.ndarray | None = None,
    sq_scale: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate one base measure row-wise.

    Returns ``(values, valid)`` where ``valid`` flags the rows whose scale
    denominator is nonzero; values of invalid rows are set to 0 and must be
    ignored by the caller.
    """
    diff = test - forecast
    h = test.shape[1]
    if base is BaseMeasure.MAE:
        return np.abs(diff).mean(axis=1), np.ones(test.shape[0], dtype=bool)
    if base is BaseMeasure.SMAPE:
        denom = np.abs(test) + np.abs(forecast)
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(denom > 0, np.abs(diff) / np.where(denom > 0, denom, 1.0), 0.0)
        return 200.0 * terms.mean(axis=1), np.ones(test.shape[0], dtype=bool)
    if base is BaseMeasure.MASE:
        if abs_scale is None:
            raise MeasureError("MASE needs the in-sample absolute scale")
        valid = abs_scale > 0
        scale = np.where(valid, abs_scale, 1.0)
        return np.abs(diff).mean(axis=1) / scale * valid, valid
    if base is BaseMeasure.RMSSE:
        if sq_scale is None:
            raise MeasureError("RMSSE needs the in-sample squared scale")
        valid = sq_scale > 0
        scale = np.where(valid, sq_scale, 1.0)
        return np.sqrt((diff**2).mean(axis=1) / scale) * valid, valid
    if base is BaseMeasure.WAPE:
        denom = np.abs(test).sum(axis=1)
        valid = denom > 0
        values = np.abs(diff).sum(axis=1) / np.where(valid, denom, 1.0) * valid
        return values, valid
    raise MeasureError(f"unknown base measure {base!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# per-series operations
# ---------------------------------------------------------------------------

def _check_forecast(series: TimeSeries, forecast: np.ndarray) -> np.ndarray:
    row = np.asarray(forecast, dtype=float)
    if row.shape != (series.h,):
        raise MeasureError(
            f"series {series.id!r}: forecast length {row.size} != horizon {series.h}"
        )
    if not np.all(np.isfinite(row)):
        raise MeasureError(f"series {series.id!r}: non-finite forecast")
    return row


def mae(series: TimeSeries, forecast: np.ndarray) -> SeriesError:
    """Mean absolute error over the test window."""
    row = _check_forecast(series, forecast)
    value = float(np.abs(series.actual_test - row).mean())
    return SeriesError(series.id, series.level, value)


def smape(series: TimeSeries, forecast: np.ndarray) -> SeriesError:
    """Symmetric MAPE in percent, with both-zero terms counted as 0."""
    row = _check_forecast(series, forecast)
    actual = series.actual_test
    denom = np.abs(actual) + np.abs(row)
    terms = np.where(denom > 0, np.abs(actual - row) / np.where(denom > 0, denom, 1.0), 0.0)
    return SeriesError(series.id, series.level, float(200.0 * terms.mean()))


def mase(series: TimeSeries, forecast: np.ndarray) -> SeriesError:
    """Mean absolute error scaled by the naive in-sample error.

    Raises :class:`ZeroScaleError` on a constant training history.
    """
    row = _check_forecast(series, forecast)
    scale = float(np.abs(np.diff(series.actual_train)).mean())
    if scale == 0.0:
        raise ZeroScaleError(series.id, "constant training history, MASE undefined")
    value = float(np.abs(series.actual_test - row).mean() / scale)
    return SeriesError(series.id, series.level, value)


def rmsse(series: TimeSeries, forecast: np.ndarray) -> SeriesError:
    """Root mean squared scaled error.

    Raises :class:`ZeroScaleError` on a constant training history.
    """
    row = _check_forecast(series, forecast)
    scale = float((np.diff(series.actual_train) ** 2).mean())
    if scale == 0.0:
        raise ZeroScaleError(series.id, "constant training history, RMSSE undefined")
    value = float(np.sqrt(((series.actual_test - row) ** 2).mean() / scale))
    return SeriesError(series.id, series.level, value)


def wape(series: TimeSeries, forecast: np.ndarray) -> SeriesError:
    """Absolute error as a fraction of total absolute actuals.

    Raises :class:`ZeroScaleError` when the test actuals are all zero.
    """
    row = _check_forecast(series, forecast)
    denom = float(np.abs(series.actual_test).sum())
    if denom == 0.0:
        raise ZeroScaleError(series.id, "all-zero test actuals, WAPE undefined")
    value = float(np.abs(series.actual_test - row).sum() / denom)
    return SeriesError(series.id, series.level, value)


MEASURE_FUNCS = {
    BaseMeasure.MAE: mae,
    BaseMeasure.SMAPE: smape,
    BaseMeasure.MASE: mase,
    BaseMeasure.RMSSE: rmsse,
    BaseMeasure.WAPE: wape,
}


# ---------------------------------------------------------------------------
# summaries over collections of series errors
# ---------------------------------------------------------------------------

def price_weighted_total(
    series_errors: Iterable[SeriesError],
    weights: PriceWeights | Mapping[str, float],
) -> float:
    """Weighted error total ``sum_i w_i * e_i`` over the whole hierarchy.

    Series excluded upstream (zero scale) simply do not appear in
    ``series_errors``; their weight mass is dropped, not redistributed.
    With RMSSE as the base measure this is the weighted scaled error used
    to score M5-style competitions.
    """
    table = weights.weights if isinstance(weights, PriceWeights) else weights
    total = 0.0
    for err in series_errors:
        if err.series_id not in table:
            raise MeasureError(f"no weight for series {err.series_id!r}")
        total += table[err.series_id] * err.value
    return total


def per_level_average(
    series_errors: Iterable[SeriesError],
    hierarchy: HierarchicalDataset | int,
) -> float:
    """Mean over levels of the per-level mean error.

    ``hierarchy`` supplies the expected number of levels (either a dataset
    or the level count itself); a level with no surviving series makes the
    scheme undefined and raises :class:`MeasureError`.
    """
    k = hierarchy if isinstance(hierarchy, int) else hierarchy.k
    sums = {j: 0.0 for j in range(1, k + 1)}
    counts = {j: 0 for j in range(1, k + 1)}
    for err in series_errors:
        if err.level not in sums:
            raise MeasureError(f"series {err.series_id!r} has level {err.level} > k={k}")
        sums[err.level] += err.value
        counts[err.level] += 1
    empty = [j for j, c in counts.items() if c == 0]
    if empty:
        raise MeasureError(f"no series left at level(s) {empty}")
    return sum(sums[j] / counts[j] for j in sums) / k


def pooled_average(series_errors: Iterable[SeriesError]) -> float:
    """Plain mean over all series of all levels."""
    values = [err.value for err in series_errors]
    if not values:
        raise MeasureError("no series errors to average")
    return float(np.mean(values))


def two_level_weighted(e_top: float, e_bottom: float, top_weight: float) -> float:
    """Blend the top-level and bottom-level errors: ``w*top + (1-w)*bottom``."""
    if not 0.0 <= top_weight <= 1.0:
        raise MeasureError(f"top weight {top_weight} outside [0, 1]")
    return top_weight * e_top + (1.0 - top_weight) * e_bottom
