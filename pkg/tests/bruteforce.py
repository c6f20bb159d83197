"""Independent brute-force reference implementations used as test oracles.

Everything here is written with explicit Python loops over plain floats,
deliberately avoiding the library's vectorised code paths, so the two
sides of every comparison stay independent.
"""

from __future__ import annotations

import math


def mae_oracle(actual: list[float], forecast: list[float]) -> float:
    total = 0.0
    for y, f in zip(actual, forecast):
        total += abs(y - f)
    return total / len(actual)


def smape_oracle(actual: list[float], forecast: list[float]) -> float:
    total = 0.0
    for y, f in zip(actual, forecast):
        denom = abs(y) + abs(f)
        if denom > 0:
            total += abs(y - f) / denom
    return 200.0 * total / len(actual)


def mase_oracle(train: list[float], actual: list[float], forecast: list[float]) -> float:
    scale = 0.0
    for i in range(1, len(train)):
        scale += abs(train[i] - train[i - 1])
    scale /= len(train) - 1
    if scale == 0.0:
        raise ZeroDivisionError("constant training history")
    total = 0.0
    for y, f in zip(actual, forecast):
        total += abs(y - f) / scale
    return total / len(actual)


def rmsse_oracle(train: list[float], actual: list[float], forecast: list[float]) -> float:
    scale = 0.0
    for i in range(1, len(train)):
        scale += (train[i] - train[i - 1]) ** 2
    scale /= len(train) - 1
    if scale == 0.0:
        raise ZeroDivisionError("constant training history")
    total = 0.0
    for y, f in zip(actual, forecast):
        total += (y - f) ** 2 / scale
    return math.sqrt(total / len(actual))


def wape_oracle(actual: list[float], forecast: list[float]) -> float:
    num = 0.0
    denom = 0.0
    for y, f in zip(actual, forecast):
        num += abs(y - f)
        denom += abs(y)
    if denom == 0.0:
        raise ZeroDivisionError("all-zero test actuals")
    return num / denom


def weights_oracle(
    bottom_sales: dict[str, float],
    parentage: dict[str, list[str]],
    bottom_ids: list[str],
    k: int,
) -> dict[str, float]:
    """Dollar-sales weights via explicit summation over constituents."""
    sales = dict(bottom_sales)
    for agg_id, members in parentage.items():
        total = 0.0
        for member in members:
            total += bottom_sales[member]
        sales[agg_id] = total
    grand_total = 0.0
    for sid in bottom_ids:
        grand_total += bottom_sales[sid]
    return {sid: value / (k * grand_total) for sid, value in sales.items()}


def price_weighted_total_oracle(
    errors: dict[str, float], weights: dict[str, float]
) -> float:
    total = 0.0
    for sid, err in errors.items():
        total += weights[sid] * err
    return total


def per_level_average_oracle(errors_by_level: dict[int, list[float]]) -> float:
    total = 0.0
    for level_errors in errors_by_level.values():
        level_sum = 0.0
        for value in level_errors:
            level_sum += value
        total += level_sum / len(level_errors)
    return total / len(errors_by_level)


def pooled_average_oracle(errors: list[float]) -> float:
    total = 0.0
    for value in errors:
        total += value
    return total / len(errors)


def wrmsse_oracle(
    series: dict[str, tuple[list[float], list[float]]],
    forecasts: dict[str, list[float]],
    weights: dict[str, float],
) -> float:
    """Single-pass weighted RMSSE over all series of one dataset.

    ``series`` maps id -> (train, test); ``forecasts`` maps id -> test
    forecast; ``weights`` are the dollar-sales weights.
    """
    total = 0.0
    for sid, (train, test) in series.items():
        scale = 0.0
        for i in range(1, len(train)):
            scale += (train[i] - train[i - 1]) ** 2
        scale /= len(train) - 1
        sq_sum = 0.0
        for y, f in zip(test, forecasts[sid]):
            sq_sum += (y - f) ** 2
        total += weights[sid] * math.sqrt(sq_sum / (len(test) * scale))
    return total


def spearman_closed_form(r1: list[float], r2: list[float]) -> float:
    """Tie-free closed form: 1 - 6*sum(d^2) / (m*(m^2-1))."""
    m = len(r1)
    d_sq = 0.0
    for a, b in zip(r1, r2):
        d_sq += (a - b) ** 2
    return 1.0 - 6.0 * d_sq / (m * (m * m - 1))


def rank_oracle(scores: dict[str, float]) -> dict[str, float]:
    """Fractional ranks by brute-force sorting with average ranks on ties."""
    items = sorted(scores.items(), key=lambda kv: kv[1])
    ranks: dict[str, float] = {}
    i = 0
    while i < len(items):
        j = i
        while j + 1 < len(items) and items[j + 1][1] == items[i][1]:
            j += 1
        avg = (i + 1 + j + 1) / 2.0
        for pos in range(i, j + 1):
            ranks[items[pos][0]] = avg
        i = j + 1
    return ranks
