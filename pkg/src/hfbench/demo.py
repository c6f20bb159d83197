"""Synthetic demo fixture: a small hierarchy plus graded forecasters.

The fixture is an intermittent-demand retail toy: a handful of items
sold in two stores, three hierarchy levels (total, store, item-store),
weekly prices and a band of forecasting methods whose accuracy degrades
in known order.  It is small enough that every experiment finishes in
seconds, and it can be written out as M5-layout CSV files to exercise
the loaders and the command line end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .hierarchy import BottomSeries, HierarchicalDataset, HierarchySpec, build_hierarchy
from .measures import ForecastSet
from .ranking import ReferenceRanking

DEMO_SEED = 20200620
DEMO_GROUPING = ((), ("store_id",), ("item_id", "store_id"))

_ITEM_RATES = (2.0, 5.0, 0.8, 3.5)
_ITEM_PRICES = (3.5, 1.2, 8.0, 2.4)
_STORE_FACTORS = (1.0, 1.4)
_METHOD_NOISE = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
_WEEK_SHAPE = np.array([1.0, 0.8, 0.7, 0.9, 1.1, 1.6, 1.9])


@dataclass
class DemoData:
    """In-memory fixture plus the raw tables needed to write it to disk."""

    dataset: HierarchicalDataset
    forecasts: dict[str, ForecastSet]
    reference: ReferenceRanking
    sales: pd.DataFrame
    calendar: pd.DataFrame
    prices: pd.DataFrame
    horizon: int


def _weekly_price(item_index: int, store_index: int, week_index: int) -> float:
    base = _ITEM_PRICES[item_index] * (1.0 + 0.1 * store_index)
    wiggle = 0.05 * ((week_index + item_index) % 3 - 1)
    return round(base * (1.0 + wiggle), 2)


def make_demo(
    seed: int = DEMO_SEED,
    n_train: int = 60,
    horizon: int = 14,
    n_methods: int = 6,
) -> DemoData:
    """Build the demo fixture deterministically from ``seed``."""
    if not 1 <= n_methods <= len(_METHOD_NOISE):
        raise ValueError(f"n_methods must be in 1..{len(_METHOD_NOISE)}")
    rng = np.random.default_rng(seed)
    n_days = n_train + horizon
    n_weeks = -(-n_days // 7)
    week_ids = [11101 + w for w in range(n_weeks)]

    ids = []
    attr_rows = []
    sales_rows = []
    price_rows = []
    price_vectors = []
    for store_index, store in enumerate(f"S{i + 1}" for i in range(len(_STORE_FACTORS))):
        for item_index, item in enumerate(f"I{i + 1}" for i in range(len(_ITEM_RATES))):
            rate = _ITEM_RATES[item_index] * _STORE_FACTORS[store_index]
            lam = rate * _WEEK_SHAPE[np.arange(n_days) % 7]
            units = rng.poisson(lam).astype(float)
            sid = f"{item}_{store}"
            ids.append(sid)
            attr_rows.append({"item_id": item, "store_id": store})
            sales_rows.append(units)
            weekly = [_weekly_price(item_index, store_index, w) for w in range(n_weeks)]
            for week_id, price in zip(week_ids, weekly):
                price_rows.append(
                    {"store_id": store, "item_id": item, "wm_yr_wk": week_id,
                     "sell_price": price}
                )
            price_vectors.append(
                np.array([weekly[t // 7] for t in range(n_days)])
            )

    sales_matrix = np.vstack(sales_rows)
    bottom = [
        BottomSeries(
            id=sid,
            attrs=attrs,
            train=sales_matrix[i, :n_train],
            test=sales_matrix[i, n_train:],
            price=price_vectors[i][:n_train],
        )
        for i, (sid, attrs) in enumerate(zip(ids, attr_rows))
    ]
    dataset = build_hierarchy(bottom, HierarchySpec(DEMO_GROUPING))

    forecasts = {}
    method_ids = []
    for m in range(n_methods):
        method_id = f"method_{m + 1:02d}"
        method_ids.append(method_id)
        noise = rng.standard_normal((len(ids), horizon))
        values = np.clip(sales_matrix[:, n_train:] + _METHOD_NOISE[m] * noise, 0.0, None)
        forecasts[method_id] = ForecastSet(
            method_id, {sid: values[i] for i, sid in enumerate(ids)}
        )
    reference = ReferenceRanking(tuple(method_ids))

    sales_frame = pd.DataFrame(attr_rows)
    sales_frame.insert(0, "id", ids)
    for t in range(n_days):
        sales_frame[f"d_{t + 1}"] = sales_matrix[:, t].astype(int)
    calendar = pd.DataFrame(
        {
            "d": [f"d_{t + 1}" for t in range(n_days)],
            "wm_yr_wk": [week_ids[t // 7] for t in range(n_days)],
        }
    )
    prices = pd.DataFrame(price_rows)
    return DemoData(
        dataset=dataset,
        forecasts=forecasts,
        reference=reference,
        sales=sales_frame,
        calendar=calendar,
        prices=prices,
        horizon=horizon,
    )


def write_demo(output_dir: str | Path, seed: int = DEMO_SEED) -> dict[str, Path]:
    """Write the demo fixture as M5-layout files plus a ready-to-run config.

    Returns a mapping of logical names to the written paths.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    demo = make_demo(seed=seed)

    paths = {
        "sales": out / "sales.csv",
        "calendar": out / "calendar.csv",
        "prices": out / "prices.csv",
        "manifest": out / "forecasts" / "manifest.csv",
        "reference": out / "reference.txt",
        "config": out / "config.yaml",
    }
    demo.sales.to_csv(paths["sales"], index=False)
    demo.calendar.to_csv(paths["calendar"], index=False)
    demo.prices.to_csv(paths["prices"], index=False)

    forecast_dir = out / "forecasts"
    forecast_dir.mkdir(exist_ok=True)
    manifest_rows = []
    for method_id, fs in demo.forecasts.items():
        frame = pd.DataFrame(
            {"id": list(fs.forecasts)}
            | {f"F{t + 1}": [row[t] for row in fs.forecasts.values()]
               for t in range(demo.horizon)}
        )
        filename = f"{method_id}.csv"
        frame.to_csv(forecast_dir / filename, index=False)
        manifest_rows.append({"method_id": method_id, "path": filename})
    pd.DataFrame(manifest_rows).to_csv(paths["manifest"], index=False)

    paths["reference"].write_text(
        "\n".join(demo.reference.method_ids) + "\n"
    )

    n_methods = len(demo.forecasts)
    config_text = f"""\
# Demo benchmark configuration (synthetic fixture).
dataset:
  format: m5
  sales: sales.csv
  prices: prices.csv
  calendar: calendar.csv
  horizon: {demo.horizon}
hierarchy:
  levels:
    - []
    - [store_id]
    - [item_id, store_id]
forecasts:
  manifest: forecasts/manifest.csv
reference: reference.txt
measures: [MAE, MASE, RMSSE, SMAPE, WAPE, PRICE_MAE, PRICE_MASE, PRICE_RMSSE, PRICE_SMAPE]
top_ks: [3, {n_methods}]
n_splits: 8
seed: {seed}
price_window: 28
temporal_cut: {demo.horizon // 2}
magic:
  measures: [MAE, PRICE_RMSSE, SMAPE]
  grid_points: 101
sweep:
  base: RMSSE
  weights: {{points: 11}}
experiments: [all]
output_dir: out
"""
    paths["config"].write_text(config_text)
    return paths
