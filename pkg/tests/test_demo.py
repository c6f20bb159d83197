"""Tests for the synthetic demo fixture."""

import numpy as np
import pytest

from hfbench import DEFAULT_MEASURES, compute_price_weights, rank_methods
from hfbench.demo import make_demo
from hfbench.experiments import evaluate_methods
from hfbench.measures import abs_diff_scale


class TestDemoFixture:
    def test_shape(self, demo):
        ds = demo.dataset
        assert ds.n_bottom == 8
        assert ds.k == 3
        assert ds.n == 60 and ds.h == 14
        assert len(demo.forecasts) == 6

    def test_no_zero_scale_series(self, demo):
        ds = demo.dataset
        for level in ds.levels:
            assert (abs_diff_scale(level.aggregate(ds.train)) > 0).all()
            assert (np.abs(level.aggregate(ds.test)).sum(axis=1) > 0).all()

    def test_quality_ordering_recovered_by_pooled_mae(self, demo):
        result = evaluate_methods(demo.dataset, demo.forecasts, ["MAE/pooled_average"])
        ranking = rank_methods(result.scores["MAE/pooled_average"])
        assert ranking.method_ids == demo.reference.method_ids

    def test_every_measure_defined(self, demo):
        result = evaluate_methods(demo.dataset, demo.forecasts, DEFAULT_MEASURES)
        assert all(table is not None for table in result.scores.values())
        assert all(count == 0 for count in result.exclusions.values())

    def test_deterministic(self):
        d1, d2 = make_demo(), make_demo()
        assert np.array_equal(d1.dataset.train, d2.dataset.train)
        assert np.array_equal(d1.dataset.test, d2.dataset.test)
        for method in d1.forecasts:
            for sid, row in d1.forecasts[method].forecasts.items():
                assert np.array_equal(row, d2.forecasts[method].forecasts[sid])

    def test_other_seed_other_data(self):
        d1, d2 = make_demo(), make_demo(seed=1)
        assert not np.array_equal(d1.dataset.train, d2.dataset.train)

    def test_weights_well_formed(self, demo):
        weights = compute_price_weights(demo.dataset, window_len=28)
        assert sum(weights.weights.values()) == pytest.approx(1.0, abs=1e-9)
        assert all(w > 0 for w in weights.weights.values())

    def test_intermittent_series_present(self, demo):
        # At least one bottom series should show zero-demand days.
        assert (demo.dataset.train == 0).any()
