"""Shared fixtures and synthetic dataset builders."""

from __future__ import annotations

import numpy as np
import pytest

from hfbench import BottomSeries, ForecastSet, HierarchySpec, build_hierarchy
from hfbench.demo import make_demo


@pytest.fixture(scope="session")
def demo():
    """The deterministic demo fixture (8 bottom series, 3 levels, 6 methods)."""
    return make_demo()


def flat_dataset(values_by_id, train_by_id=None, prices=None):
    """Single-level (identity grouping) dataset from test vectors."""
    bottom = []
    for i, (sid, test) in enumerate(values_by_id.items()):
        test = np.asarray(test, dtype=float)
        if train_by_id is not None and sid in train_by_id:
            train = np.asarray(train_by_id[sid], dtype=float)
        else:
            train = np.arange(1.0, 7.0) + i
        price = None if prices is None else prices.get(sid)
        bottom.append(
            BottomSeries(sid, {"unit": sid}, train=train, test=test, price=price)
        )
    return build_hierarchy(bottom, HierarchySpec((("unit",),)))


def two_level_dataset(values_by_id, train_by_id=None, prices=None):
    """Total + identity bottom level."""
    bottom = []
    for i, (sid, test) in enumerate(values_by_id.items()):
        test = np.asarray(test, dtype=float)
        if train_by_id is not None and sid in train_by_id:
            train = np.asarray(train_by_id[sid], dtype=float)
        else:
            train = np.arange(1.0, 7.0) + i
        price = None if prices is None else prices.get(sid)
        bottom.append(
            BottomSeries(sid, {"unit": sid}, train=train, test=test, price=price)
        )
    return build_hierarchy(bottom, HierarchySpec(((), ("unit",))))


def random_instance(rng, n_bottom=6, n_groups=2, n_train=12, horizon=4, n_methods=5):
    """Random three-level dataset plus positively-biased random forecasters.

    Data are strictly positive with a trend, so no series hits a zero
    scale under any measure.
    """
    groups = [f"g{i % n_groups}" for i in range(n_bottom)]
    bottom = []
    for i in range(n_bottom):
        base = rng.uniform(2.0, 10.0)
        train = base + np.arange(n_train) * rng.uniform(0.2, 1.0) + rng.uniform(
            0.0, 0.5, size=n_train
        )
        test = base + n_train + rng.uniform(0.0, 3.0, size=horizon)
        bottom.append(
            BottomSeries(
                f"s{i}",
                {"group": groups[i], "unit": f"s{i}"},
                train=train,
                test=test,
                price=rng.uniform(0.5, 4.0),
            )
        )
    dataset = build_hierarchy(
        bottom, HierarchySpec(((), ("group",), ("group", "unit")))
    )
    forecasts = {}
    for m in range(n_methods):
        method_id = f"m{m}"
        forecasts[method_id] = ForecastSet(
            method_id,
            {
                f"s{i}": np.clip(
                    dataset.test[i] + rng.normal(0.0, 1.0 + m, size=horizon), 0.0, None
                )
                for i in range(n_bottom)
            },
        )
    return dataset, forecasts
