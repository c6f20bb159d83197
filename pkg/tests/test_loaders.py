"""Tests for the M5-layout, long-format and forecast file loaders."""

import numpy as np
import pandas as pd
import pytest

from hfbench import LoadError, LoadOptions, load_forecast_csv, load_long_csv, load_m5, load_manifest
from hfbench.demo import make_demo, write_demo

THREE_LEVELS = ((), ("store_id",), ("item_id", "store_id"))


def write_small_sales(path, n_days=8, stores=("S1", "S2"), items=("I1", "I2")):
    rows = []
    value = 1
    for store in stores:
        for item in items:
            row = {"id": f"{item}_{store}", "item_id": item, "store_id": store}
            for d in range(1, n_days + 1):
                row[f"d_{d}"] = value
                value += 1
            rows.append(row)
    frame = pd.DataFrame(rows)
    frame.to_csv(path, index=False)
    return frame


class TestLoadM5:
    def test_two_by_two_gives_seven_series(self, tmp_path):
        sales = tmp_path / "sales.csv"
        write_small_sales(sales)
        ds = load_m5(sales, options=LoadOptions(horizon=2, grouping=THREE_LEVELS))
        assert ds.n_bottom == 4
        assert ds.n_series == 1 + 2 + 4
        assert ds.h == 2 and ds.n == 6

    def test_demo_roundtrip_matches_in_memory_fixture(self, tmp_path):
        paths = write_demo(tmp_path)
        demo = make_demo()
        ds = load_m5(
            paths["sales"],
            paths["prices"],
            paths["calendar"],
            LoadOptions(horizon=demo.horizon, grouping=THREE_LEVELS),
        )
        assert ds.bottom_ids == demo.dataset.bottom_ids
        assert np.array_equal(ds.train, demo.dataset.train)
        assert np.array_equal(ds.test, demo.dataset.test)
        assert np.allclose(ds.revenue, demo.dataset.revenue, rtol=0, atol=1e-12)

    def test_missing_day_column(self, tmp_path):
        sales = tmp_path / "sales.csv"
        frame = write_small_sales(sales)
        frame.drop(columns=["d_3"]).to_csv(sales, index=False)
        with pytest.raises(LoadError, match="d_3"):
            load_m5(sales, options=LoadOptions(horizon=2, grouping=THREE_LEVELS))

    def test_non_numeric_sales(self, tmp_path):
        sales = tmp_path / "sales.csv"
        frame = write_small_sales(sales)
        frame["d_2"] = frame["d_2"].astype(object)
        frame.loc[0, "d_2"] = "oops"
        frame.to_csv(sales, index=False)
        with pytest.raises(LoadError, match="non-numeric"):
            load_m5(sales, options=LoadOptions(horizon=2, grouping=THREE_LEVELS))

    def test_missing_attribute_column(self, tmp_path):
        sales = tmp_path / "sales.csv"
        frame = write_small_sales(sales)
        frame.drop(columns=["store_id"]).to_csv(sales, index=False)
        with pytest.raises(LoadError, match="store_id"):
            load_m5(sales, options=LoadOptions(horizon=2, grouping=THREE_LEVELS))

    def test_horizon_too_large(self, tmp_path):
        sales = tmp_path / "sales.csv"
        write_small_sales(sales, n_days=5)
        with pytest.raises(LoadError, match="horizon"):
            load_m5(sales, options=LoadOptions(horizon=5, grouping=THREE_LEVELS))

    def test_duplicate_ids(self, tmp_path):
        sales = tmp_path / "sales.csv"
        frame = write_small_sales(sales)
        pd.concat([frame, frame.iloc[[0]]]).to_csv(sales, index=False)
        with pytest.raises(LoadError, match="duplicate"):
            load_m5(sales, options=LoadOptions(horizon=2, grouping=THREE_LEVELS))

    def test_prices_without_calendar(self, tmp_path):
        sales = tmp_path / "sales.csv"
        write_small_sales(sales)
        prices = tmp_path / "prices.csv"
        prices.write_text("store_id,item_id,wm_yr_wk,sell_price\nS1,I1,1,2.0\n")
        with pytest.raises(LoadError, match="calendar"):
            load_m5(sales, prices, None, LoadOptions(horizon=2, grouping=THREE_LEVELS))

    def test_unpriced_units_are_zero_revenue(self, tmp_path, caplog):
        sales = tmp_path / "sales.csv"
        write_small_sales(sales, n_days=8)
        calendar = tmp_path / "calendar.csv"
        pd.DataFrame(
            {"d": [f"d_{i}" for i in range(1, 9)], "wm_yr_wk": [1] * 7 + [2]}
        ).to_csv(calendar, index=False)
        prices = tmp_path / "prices.csv"
        pd.DataFrame(
            [
                {"store_id": s, "item_id": i, "wm_yr_wk": 1, "sell_price": 2.0}
                for s in ("S1", "S2")
                for i in ("I1",)  # I2 never priced
            ]
        ).to_csv(prices, index=False)
        with caplog.at_level("WARNING"):
            ds = load_m5(
                sales, prices, calendar, LoadOptions(horizon=2, grouping=THREE_LEVELS)
            )
        assert "without a price" in caplog.text
        # I2 rows have zero revenue, I1 rows are units * 2.0.
        idx = {sid: i for i, sid in enumerate(ds.bottom_ids)}
        assert ds.revenue[idx["I2_S1"]].sum() == 0.0
        assert np.array_equal(ds.revenue[idx["I1_S1"]], ds.train[idx["I1_S1"]] * 2.0)

    def test_options_required(self, tmp_path):
        sales = tmp_path / "sales.csv"
        write_small_sales(sales)
        with pytest.raises(LoadError):
            load_m5(sales)

    def test_explicit_train_end_ignores_trailing_days(self, tmp_path):
        sales = tmp_path / "sales.csv"
        frame = write_small_sales(sales, n_days=8)
        ds = load_m5(
            sales,
            options=LoadOptions(horizon=2, train_end=4, grouping=THREE_LEVELS),
        )
        assert ds.n == 4 and ds.h == 2
        row = frame.iloc[0]
        sid = row["id"]
        assert ds.get_series(sid).actual_test.tolist() == [row["d_5"], row["d_6"]]

    def test_loaded_totals_match_flat_column_sums(self, tmp_path):
        # Spreadsheet-style oracle: sum the day columns of the raw file.
        paths = write_demo(tmp_path)
        frame = pd.read_csv(paths["sales"])
        ds = load_m5(
            paths["sales"],
            options=LoadOptions(horizon=14, grouping=THREE_LEVELS),
        )
        total = ds.get_series("TOTAL")
        for t in range(60):
            assert total.actual_train[t] == frame[f"d_{t + 1}"].sum()
        for t in range(14):
            assert total.actual_test[t] == frame[f"d_{61 + t}"].sum()

    def test_nan_attribute_values_rejected(self, tmp_path):
        sales = tmp_path / "sales.csv"
        frame = write_small_sales(sales)
        frame.loc[0, "store_id"] = None
        frame.to_csv(sales, index=False)
        with pytest.raises(LoadError, match="missing values"):
            load_m5(sales, options=LoadOptions(horizon=2, grouping=THREE_LEVELS))


class TestLoadLongCsv:
    def write_long(self, path, with_price=False):
        rows = []
        for sid, group in (("a", "g1"), ("b", "g1"), ("c", "g2")):
            for t in range(6):
                row = {
                    "series_id": sid,
                    "group": group,
                    "date": f"2024-01-{t + 1:02d}",
                    "value": float(t + (ord(sid) - ord("a")) * 10),
                }
                if with_price:
                    row["price"] = 1.5
                rows.append(row)
        pd.DataFrame(rows).to_csv(path, index=False)

    def test_basic_load(self, tmp_path):
        path = tmp_path / "long.csv"
        self.write_long(path)
        ds = load_long_csv(
            path,
            LoadOptions(horizon=2, grouping=((), ("group",), ("series_id",))),
        )
        assert ds.n_bottom == 3
        assert ds.n == 4 and ds.h == 2
        assert ds.level_sizes() == {1: 1, 2: 2, 3: 3}
        assert ds.get_series("a").actual_test.tolist() == [4.0, 5.0]

    def test_price_column_builds_revenue(self, tmp_path):
        path = tmp_path / "long.csv"
        self.write_long(path, with_price=True)
        ds = load_long_csv(
            path, LoadOptions(horizon=2, grouping=((), ("series_id",)))
        )
        assert np.array_equal(ds.revenue, ds.train * 1.5)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "long.csv"
        pd.DataFrame({"series_id": ["a"], "date": ["d1"]}).to_csv(path, index=False)
        with pytest.raises(LoadError, match="value"):
            load_long_csv(path, LoadOptions(horizon=1, grouping=((), ("series_id",))))

    def test_ragged_dates(self, tmp_path):
        path = tmp_path / "long.csv"
        frame = pd.DataFrame(
            {
                "series_id": ["a", "a", "a", "b", "b"],
                "date": ["d1", "d2", "d3", "d1", "d3"],
                "value": [1.0, 2.0, 3.0, 4.0, 5.0],
            }
        )
        frame.to_csv(path, index=False)
        with pytest.raises(LoadError, match="missing dates"):
            load_long_csv(path, LoadOptions(horizon=1, grouping=((), ("series_id",))))

    def test_attribute_varies_within_series(self, tmp_path):
        path = tmp_path / "long.csv"
        frame = pd.DataFrame(
            {
                "series_id": ["a", "a", "a", "b", "b", "b"],
                "group": ["g1", "g2", "g1", "g1", "g1", "g1"],
                "date": ["d1", "d2", "d3"] * 2,
                "value": [1.0] * 6,
            }
        )
        frame.to_csv(path, index=False)
        with pytest.raises(LoadError, match="varies"):
            load_long_csv(
                path, LoadOptions(horizon=1, grouping=((), ("group",), ("series_id",)))
            )


class TestForecastFiles:
    def test_load_forecast_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        pd.DataFrame(
            {"id": ["a", "b"], "F1": [1.0, 2.0], "F2": [3.0, 4.0]}
        ).to_csv(path, index=False)
        fs = load_forecast_csv(path, "m", horizon=2)
        assert fs.method_id == "m"
        assert fs.forecasts["b"].tolist() == [2.0, 4.0]

    def test_missing_forecast_columns(self, tmp_path):
        path = tmp_path / "m.csv"
        pd.DataFrame({"id": ["a"], "F1": [1.0]}).to_csv(path, index=False)
        with pytest.raises(LoadError, match="F2"):
            load_forecast_csv(path, "m", horizon=2)

    def test_duplicate_forecast_ids(self, tmp_path):
        path = tmp_path / "m.csv"
        pd.DataFrame({"id": ["a", "a"], "F1": [1.0, 2.0]}).to_csv(path, index=False)
        with pytest.raises(LoadError, match="duplicate"):
            load_forecast_csv(path, "m", horizon=1)

    def test_manifest_loads_all_methods(self, tmp_path):
        for name in ("m1", "m2"):
            pd.DataFrame({"id": ["a"], "F1": [1.0]}).to_csv(
                tmp_path / f"{name}.csv", index=False
            )
        manifest = tmp_path / "manifest.csv"
        pd.DataFrame(
            {"method_id": ["m1", "m2"], "path": ["m1.csv", "m2.csv"]}
        ).to_csv(manifest, index=False)
        forecasts = load_manifest(manifest, horizon=1)
        assert set(forecasts) == {"m1", "m2"}

    def test_manifest_missing_file(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        pd.DataFrame({"method_id": ["m1"], "path": ["gone.csv"]}).to_csv(
            manifest, index=False
        )
        with pytest.raises(LoadError, match="not found"):
            load_manifest(manifest, horizon=1)

    def test_manifest_duplicate_methods(self, tmp_path):
        pd.DataFrame({"id": ["a"], "F1": [1.0]}).to_csv(tmp_path / "m.csv", index=False)
        manifest = tmp_path / "manifest.csv"
        pd.DataFrame(
            {"method_id": ["m1", "m1"], "path": ["m.csv", "m.csv"]}
        ).to_csv(manifest, index=False)
        with pytest.raises(LoadError, match="duplicate"):
            load_manifest(manifest, horizon=1)
