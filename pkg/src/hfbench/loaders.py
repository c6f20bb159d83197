"""File ingestion: M5-layout CSVs, long-format CSVs and forecast files.

The M5 layout is three files: a wide sales file (one row per bottom
series with an ``id`` column, categorical attribute columns and day
columns ``d_1..d_T``), a calendar mapping each day column to a weekly
price key, and a price file keyed by (store, item, week).  Forecast
files follow the competition submission layout: an ``id`` column plus
``F1..Fh``.  A manifest CSV pairs each method id with its forecast file.

The long format is one observation per row with columns ``series_id``,
any number of attribute columns, ``date`` and ``value`` (optionally
``price``); every series must cover the same dates.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .hierarchy import (
    M5_GROUPING,
    HierarchicalDataset,
    HierarchySpec,
)
from .measures import ForecastSet, MeasureError

log = logging.getLogger(__name__)

_DAY_COLUMN = re.compile(r"^d_(\d+)$")
_FORECAST_COLUMN = re.compile(r"^F(\d+)$")


class LoadError(ValueError):
    """Raised when an input file does not match the documented layout."""


@dataclass(frozen=True)
class LoadOptions:
    """How to slice a sales file into training history and test window.

    ``horizon`` is the test length ``h``.  ``train_end`` is the number of
    days kept as history; by default everything before the last
    ``horizon`` days.  ``grouping`` lists the attribute key per level and
    defaults to the twelve-level M5 grouping.
    """

    horizon: int
    train_end: int | None = None
    grouping: Sequence[Sequence[str]] = field(default=M5_GROUPING)

    def spec(self) -> HierarchySpec:
        return HierarchySpec(tuple(tuple(key) for key in self.grouping))


def _day_columns(columns: Sequence[str]) -> list[str]:
    days = {}
    for name in columns:
        match = _DAY_COLUMN.match(name)
        if match:
            days[int(match.group(1))] = name
    if not days:
        raise LoadError("no day columns (d_1, d_2, ...) found")
    expected = range(1, max(days) + 1)
    missing = [f"d_{i}" for i in expected if i not in days]
    if missing:
        raise LoadError(f"missing day columns: {missing[:5]}")
    return [days[i] for i in expected]


def _split_days(n_days: int, options: LoadOptions) -> tuple[int, int]:
    h = options.horizon
    if h < 1:
        raise LoadError("horizon must be >= 1")
    train_end = options.train_end if options.train_end is not None else n_days - h
    if train_end < 2:
        raise LoadError(
            f"horizon {h} leaves only {train_end} training days of {n_days}; "
            "need at least 2"
        )
    if train_end + h > n_days:
        raise LoadError(
            f"train_end {train_end} + horizon {h} exceeds the {n_days} available days"
        )
    return train_end, h


def load_m5(
    sales_path: str | Path,
    prices_path: str | Path | None = None,
    calendar_path: str | Path | None = None,
    options: LoadOptions | None = None,
) -> HierarchicalDataset:
    """Load an M5-layout dataset, optionally with weekly prices.

    The sales file must be wide format with an ``id`` column, the
    attribute columns referenced by the grouping, and day columns
    ``d_1..d_T``.  When ``prices_path`` is given, ``calendar_path`` must
    map each day to its ``wm_yr_wk`` price week; days with units sold but
    no price are priced at zero with a warning.
    """
    if options is None:
        raise LoadError("options with the forecast horizon are required")
    sales = pd.read_csv(sales_path)
    if "id" not in sales.columns:
        raise LoadError(f"{sales_path}: no 'id' column")
    if sales["id"].duplicated().any():
        dupes = sales.loc[sales["id"].duplicated(), "id"].head(3).tolist()
        raise LoadError(f"{sales_path}: duplicate series ids {dupes}")
    spec = options.spec()
    for name in spec.attributes:
        if name not in sales.columns:
            raise LoadError(f"{sales_path}: grouping attribute column {name!r} missing")
        if sales[name].isna().any():
            raise LoadError(f"{sales_path}: missing values in attribute column {name!r}")

    day_cols = _day_columns(sales.columns)
    values = sales[day_cols].to_numpy()
    if not np.issubdtype(values.dtype, np.number):
        bad = [c for c in day_cols if not np.issubdtype(sales[c].dtype, np.number)]
        raise LoadError(f"{sales_path}: non-numeric sales in columns {bad[:5]}")
    values = values.astype(float)
    if np.isnan(values).any():
        raise LoadError(f"{sales_path}: missing sales values")

    train_end, h = _split_days(len(day_cols), options)
    train = values[:, :train_end]
    test = values[:, train_end : train_end + h]
    ids = sales["id"].astype(str).tolist()
    attrs = {
        name: sales[name].astype(str).to_numpy(dtype=object) for name in spec.attributes
    }

    revenue = None
    if prices_path is not None:
        if calendar_path is None:
            raise LoadError("prices need a calendar file to map days to weeks")
        price_matrix = _expand_prices(
            sales, day_cols[:train_end], prices_path, calendar_path, train
        )
        revenue = train * price_matrix

    return HierarchicalDataset(spec, ids, attrs, train, test, revenue)


def _expand_prices(
    sales: pd.DataFrame,
    train_day_cols: list[str],
    prices_path: str | Path,
    calendar_path: str | Path,
    train: np.ndarray,
) -> np.ndarray:
    calendar = pd.read_csv(calendar_path)
    for column in ("d", "wm_yr_wk"):
        if column not in calendar.columns:
            raise LoadError(f"{calendar_path}: column {column!r} missing")
    day_to_week = dict(zip(calendar["d"].astype(str), calendar["wm_yr_wk"]))
    missing_days = [d for d in train_day_cols if d not in day_to_week]
    if missing_days:
        raise LoadError(f"{calendar_path}: no week for days {missing_days[:5]}")
    weeks = [day_to_week[d] for d in train_day_cols]

    prices = pd.read_csv(prices_path)
    for column in ("store_id", "item_id", "wm_yr_wk", "sell_price"):
        if column not in prices.columns:
            raise LoadError(f"{prices_path}: column {column!r} missing")
    for column in ("store_id", "item_id"):
        if column not in sales.columns:
            raise LoadError(f"price join needs sales column {column!r}")
    price_table = {
        (str(store), str(item), week): float(price)
        for store, item, week, price in zip(
            prices["store_id"], prices["item_id"], prices["wm_yr_wk"], prices["sell_price"]
        )
    }

    week_values = sorted(set(weeks))
    week_pos = {week: i for i, week in enumerate(week_values)}
    week_index = np.array([week_pos[w] for w in weeks])

    n_rows = len(sales)
    matrix = np.zeros((n_rows, len(train_day_cols)))
    unpriced_units = 0
    first_unpriced: list[str] = []
    stores = sales["store_id"].astype(str).to_numpy()
    items = sales["item_id"].astype(str).to_numpy()
    for i in range(n_rows):
        weekly = np.array(
            [price_table.get((stores[i], items[i], week), 0.0) for week in week_values]
        )
        row = weekly[week_index]
        matrix[i] = row
        sold_unpriced = (train[i] > 0) & (row == 0.0)
        if sold_unpriced.any():
            unpriced_units += int(train[i][sold_unpriced].sum())
            if len(first_unpriced) < 3:
                first_unpriced.append(str(sales["id"].iloc[i]))
    if unpriced_units:
        log.warning(
            "%d units sold without a price (priced at 0); first series: %s",
            unpriced_units,
            ", ".join(first_unpriced),
        )
    return matrix


def load_long_csv(
    path: str | Path,
    options: LoadOptions,
) -> HierarchicalDataset:
    """Load a long-format CSV: series_id, attribute columns, date, value.

    An optional ``price`` column supplies a per-day unit price.  Every
    series must cover exactly the same set of dates (sorted
    lexicographically, so use ISO dates).
    """
    frame = pd.read_csv(path)
    for column in ("series_id", "date", "value"):
        if column not in frame.columns:
            raise LoadError(f"{path}: column {column!r} missing")
    spec = options.spec()
    for name in spec.attributes:
        if name not in frame.columns:
            raise LoadError(f"{path}: grouping attribute column {name!r} missing")
    if not np.issubdtype(frame["value"].dtype, np.number):
        raise LoadError(f"{path}: non-numeric values")

    frame = frame.copy()
    frame["series_id"] = frame["series_id"].astype(str)
    frame["date"] = frame["date"].astype(str)
    wide = frame.pivot_table(
        index="series_id", columns="date", values="value", aggfunc="first", sort=True
    )
    if wide.isna().any().any():
        bad = wide.index[wide.isna().any(axis=1)][:3].tolist()
        raise LoadError(f"{path}: series with missing dates, e.g. {bad}")
    counts = frame.groupby("series_id").size()
    if counts.nunique() != 1 or counts.iloc[0] != wide.shape[1]:
        raise LoadError(f"{path}: duplicate (series_id, date) rows")

    ids = wide.index.tolist()
    values = wide.to_numpy(dtype=float)
    train_end, h = _split_days(values.shape[1], options)
    train = values[:, :train_end]
    test = values[:, train_end : train_end + h]

    first_rows = frame.drop_duplicates("series_id").set_index("series_id")
    attrs = {}
    for name in spec.attributes:
        if name == "series_id":
            # The series id itself may serve as the identity grouping key.
            attrs[name] = np.asarray(ids, dtype=object)
            continue
        per_series = frame.groupby("series_id")[name].nunique()
        if (per_series > 1).any():
            raise LoadError(f"{path}: attribute {name!r} varies within a series")
        attrs[name] = first_rows.loc[ids, name].astype(str).to_numpy(dtype=object)

    revenue = None
    if "price" in frame.columns:
        price_wide = frame.pivot_table(
            index="series_id", columns="date", values="price", aggfunc="first", sort=True
        )
        if price_wide.isna().any().any():
            raise LoadError(f"{path}: missing prices for some (series, date) pairs")
        prices = price_wide.loc[ids].to_numpy(dtype=float)[:, :train_end]
        revenue = train * prices

    return HierarchicalDataset(spec, ids, attrs, train, test, revenue)


def load_forecast_csv(path: str | Path, method_id: str, horizon: int) -> ForecastSet:
    """Read one submission-layout forecast file (id, F1..Fh)."""
    frame = pd.read_csv(path)
    if "id" not in frame.columns:
        raise LoadError(f"{path}: no 'id' column")
    f_cols = {}
    for name in frame.columns:
        match = _FORECAST_COLUMN.match(name)
        if match:
            f_cols[int(match.group(1))] = name
    missing = [f"F{i}" for i in range(1, horizon + 1) if i not in f_cols]
    if missing:
        raise LoadError(f"{path}: missing forecast columns {missing[:5]}")
    ordered = [f_cols[i] for i in range(1, horizon + 1)]
    values = frame[ordered].to_numpy()
    if not np.issubdtype(values.dtype, np.number) or np.isnan(values.astype(float)).any():
        raise LoadError(f"{path}: non-numeric or missing forecast values")
    values = values.astype(float)
    ids = frame["id"].astype(str)
    if ids.duplicated().any():
        raise LoadError(f"{path}: duplicate forecast ids")
    try:
        return ForecastSet(method_id, dict(zip(ids, values)))
    except MeasureError as exc:
        raise LoadError(f"{path}: {exc}") from exc


def load_manifest(
    manifest_path: str | Path, horizon: int
) -> dict[str, ForecastSet]:
    """Read a manifest CSV (method_id, path) and every listed forecast file.

    Relative paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    frame = pd.read_csv(manifest_path)
    for column in ("method_id", "path"):
        if column not in frame.columns:
            raise LoadError(f"{manifest_path}: column {column!r} missing")
    if frame["method_id"].duplicated().any():
        raise LoadError(f"{manifest_path}: duplicate method ids")
    forecasts = {}
    for method_id, rel_path in zip(frame["method_id"].astype(str), frame["path"].astype(str)):
        path = Path(rel_path)
        if not path.is_absolute():
            path = manifest_path.parent / path
        if not path.exists():
            raise LoadError(f"{manifest_path}: forecast file not found: {path}")
        forecasts[method_id] = load_forecast_csv(path, method_id, horizon)
    return forecasts
