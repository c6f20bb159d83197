"""Grouped time-series hierarchy: construction, aggregation, weights and splits.

A hierarchical dataset is defined by a set of bottom-level series, each
carrying categorical attributes, plus an ordered list of grouping keys.
Every key (a tuple of attribute names) induces one level: the series of
that level are the element-wise sums of the bottom series sharing a key
value combination.  Level 1 is the grand total (empty key) and the last
level is the identity grouping, so each bottom series is its own group.

Aggregation is expressed through one sparse summing matrix per level,
which keeps re-aggregation after dataset splits cheap and makes the
"aggregates are exact sums of constituents" invariant hold by
construction.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

#: The twelve-level grouping used by M5-style retail datasets: total, state,
#: store, category, department, the four cross groupings, item, item-state
#: and the item-store identity level.
M5_GROUPING: tuple[tuple[str, ...], ...] = (
    (),
    ("state_id",),
    ("store_id",),
    ("cat_id",),
    ("dept_id",),
    ("state_id", "cat_id"),
    ("state_id", "dept_id"),
    ("store_id", "cat_id"),
    ("store_id", "dept_id"),
    ("item_id",),
    ("item_id", "state_id"),
    ("item_id", "store_id"),
)

TOTAL_ID = "TOTAL"


class HierarchyError(ValueError):
    """Raised when a dataset, spec or weighting request is malformed."""


class ZeroSalesError(HierarchyError):
    """Raised when dollar sales are all zero and weights are undefined."""


@dataclass(frozen=True)
class TimeSeries:
    """One series of the hierarchy with its training history and test window.

    Parameters
    ----------
    id
        Unique series identifier within the dataset.
    level
        1-based level index; level 1 is the most aggregate.
    actual_train
        Observed history of length ``n`` (``n >= 2``).
    actual_test
        Held-out actuals of length ``h`` (``h >= 1``).
    """

    id: str
    level: int
    actual_train: np.ndarray
    actual_test: np.ndarray

    def __post_init__(self) -> None:
        train = np.asarray(self.actual_train, dtype=float)
        test = np.asarray(self.actual_test, dtype=float)
        object.__setattr__(self, "actual_train", train)
        object.__setattr__(self, "actual_test", test)
        if train.ndim != 1 or train.size < 2:
            raise HierarchyError(
                f"series {self.id!r}: training history must hold at least "
                f"2 observations, got {train.size}"
            )
        if test.ndim != 1 or test.size < 1:
            raise HierarchyError(f"series {self.id!r}: empty test window")
        for name, values in (("train", train), ("test", test)):
            if not np.all(np.isfinite(values)):
                raise HierarchyError(f"series {self.id!r}: non-finite {name} values")
            if np.any(values < 0):
                raise HierarchyError(f"series {self.id!r}: negative {name} values")

    @property
    def n(self) -> int:
        return self.actual_train.size

    @property
    def h(self) -> int:
        return self.actual_test.size


@dataclass(frozen=True)
class HierarchySpec:
    """Ordered grouping keys, one per level, from most to least aggregate.

    ``grouping_keys[0]`` must be the empty key (the grand total) whenever
    there is more than one level.  The last key must identify every bottom
    series uniquely; this is validated against the data at build time.  A
    single-level spec may use a non-empty key, which models a flat dataset
    with no aggregation.
    """

    grouping_keys: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        keys = tuple(tuple(key) for key in self.grouping_keys)
        object.__setattr__(self, "grouping_keys", keys)
        if not keys:
            raise HierarchyError("spec needs at least one level")
        if len(keys) > 1 and keys[0] != ():
            raise HierarchyError("level 1 must be the empty grouping (grand total)")
        if len(set(keys)) != len(keys):
            raise HierarchyError("duplicate grouping keys")

    @property
    def k(self) -> int:
        """Total number of levels."""
        return len(self.grouping_keys)

    @property
    def attributes(self) -> tuple[str, ...]:
        """All attribute names referenced by any level, in first-use order."""
        seen: dict[str, None] = {}
        for key in self.grouping_keys:
            for name in key:
                seen.setdefault(name)
        return tuple(seen)


@dataclass(frozen=True)
class BottomSeries:
    """Input record for :func:`build_hierarchy`.

    ``price`` is optional: a scalar or a per-training-day vector of unit
    prices, used only for dollar-sales weighting.
    """

    id: str
    attrs: Mapping[str, str]
    train: np.ndarray
    test: np.ndarray
    price: np.ndarray | float | None = None


class Level:
    """One hierarchical level: series ids plus its sparse summing matrix."""

    __slots__ = ("index", "key", "ids", "summing", "group_values", "is_identity")

    def __init__(
        self,
        index: int,
        key: tuple[str, ...],
        ids: tuple[str, ...],
        summing: sp.csr_matrix,
        group_values: tuple[tuple[str, ...], ...],
        is_identity: bool = False,
    ) -> None:
        self.index = index
        self.key = key
        self.ids = ids
        self.summing = summing
        self.group_values = group_values
        self.is_identity = is_identity

    @property
    def n_series(self) -> int:
        return len(self.ids)

    def aggregate(self, bottom_matrix: np.ndarray) -> np.ndarray:
        """Sum a (n_bottom, T) matrix into this level's (n_series, T) matrix.

        The identity (bottom) level returns the input unchanged; callers
        treat aggregates as read-only.
        """
        if self.is_identity:
            return np.asarray(bottom_matrix)
        out = self.summing @ bottom_matrix
        return np.asarray(out)

    def members(self) -> list[np.ndarray]:
        """Bottom-row indices of each group, in series order."""
        csr = self.summing
        return [csr.indices[csr.indptr[i] : csr.indptr[i + 1]] for i in range(self.n_series)]


def _aggregate_id(key: tuple[str, ...], values: tuple[str, ...]) -> str:
    if not key:
        return TOTAL_ID
    return "|".join(f"{k}={v}" for k, v in zip(key, values))


def _build_level(
    index: int,
    key: tuple[str, ...],
    attrs: Mapping[str, np.ndarray],
    bottom_ids: tuple[str, ...],
    is_last: bool,
) -> Level:
    n_bottom = len(bottom_ids)
    if not key:
        summing = sp.csr_matrix(np.ones((1, n_bottom)))
        return Level(index, key, (TOTAL_ID,), summing, ((),))

    for name in key:
        if name not in attrs:
            raise HierarchyError(f"grouping attribute {name!r} missing from bottom series")

    value_rows = list(zip(*(attrs[name] for name in key)))
    groups: dict[tuple[str, ...], int] = {}
    for row in value_rows:
        groups.setdefault(row, len(groups))

    if is_last:
        if len(groups) != n_bottom:
            raise HierarchyError(
                "last level must identify every bottom series uniquely "
                f"({len(groups)} groups for {n_bottom} series)"
            )
        # Identity grouping: keep bottom order and reuse the bottom ids.
        summing = sp.identity(n_bottom, format="csr")
        return Level(index, key, bottom_ids, summing, tuple(value_rows), is_identity=True)

    ordered = sorted(groups)
    group_index = {values: i for i, values in enumerate(ordered)}
    codes = np.fromiter((group_index[row] for row in value_rows), dtype=np.int64, count=n_bottom)
    summing = sp.csr_matrix(
        (np.ones(n_bottom), (codes, np.arange(n_bottom))),
        shape=(len(ordered), n_bottom),
    )
    ids = tuple(_aggregate_id(key, values) for values in ordered)
    return Level(index, key, ids, summing, tuple(ordered))


class HierarchicalDataset:
    """Immutable bundle of bottom-level data and its derived level structure.

    All series share a common training length ``n`` and test horizon ``h``.
    Aggregate series are derived, never stored: any (n_bottom, T) matrix is
    mapped to a level through that level's summing matrix, so an aggregate
    is exact integer arithmetic away from its constituents.
    """

    def __init__(
        self,
        spec: HierarchySpec,
        bottom_ids: Sequence[str],
        attrs: Mapping[str, np.ndarray],
        train: np.ndarray,
        test: np.ndarray,
        revenue: np.ndarray | None = None,
        _levels: tuple[Level, ...] | None = None,
    ) -> None:
        self.spec = spec
        self.bottom_ids = tuple(bottom_ids)
        self.attrs = {name: np.asarray(col) for name, col in attrs.items()}
        self.train = np.ascontiguousarray(train, dtype=float)
        self.test = np.ascontiguousarray(test, dtype=float)
        self.revenue = None if revenue is None else np.ascontiguousarray(revenue, dtype=float)
        self._validate_matrices()
        if _levels is None:
            last_index = spec.k - 1
            _levels = tuple(
                _build_level(
                    j + 1, key, self.attrs, self.bottom_ids, is_last=j == last_index
                )
                for j, key in enumerate(spec.grouping_keys)
            )
            if _levels[-1].n_series != self.n_bottom:
                raise HierarchyError(
                    "last level must identify every bottom series uniquely "
                    f"({_levels[-1].n_series} groups for {self.n_bottom} series)"
                )
        self.levels: tuple[Level, ...] = _levels
        self._id_index: dict[str, tuple[int, int]] = {}
        for level in self.levels:
            for row, sid in enumerate(level.ids):
                if sid in self._id_index:
                    raise HierarchyError(f"duplicate series id {sid!r} across levels")
                self._id_index[sid] = (level.index, row)
        self._parentage: dict[str, list[str]] | None = None

    def _validate_matrices(self) -> None:
        n_bottom = len(self.bottom_ids)
        if len(set(self.bottom_ids)) != n_bottom:
            raise HierarchyError("duplicate bottom series ids")
        if self.train.shape[0] != n_bottom or self.test.shape[0] != n_bottom:
            raise HierarchyError("train/test row count does not match bottom ids")
        if self.train.shape[1] < 2:
            raise HierarchyError("training history must hold at least 2 observations")
        if self.test.shape[1] < 1:
            raise HierarchyError("test window must hold at least 1 observation")
        for name, matrix in (("train", self.train), ("test", self.test)):
            if not np.all(np.isfinite(matrix)):
                raise HierarchyError(f"non-finite values in bottom {name} data")
            if np.any(matrix < 0):
                raise HierarchyError(f"negative values in bottom {name} data")
        if self.revenue is not None and self.revenue.shape != self.train.shape:
            raise HierarchyError("revenue matrix must match the training matrix shape")
        for name, col in self.attrs.items():
            if len(col) != n_bottom:
                raise HierarchyError(f"attribute column {name!r} has wrong length")

    # -- basic dimensions -------------------------------------------------

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def n(self) -> int:
        """Training length shared by all series."""
        return self.train.shape[1]

    @property
    def h(self) -> int:
        """Test horizon shared by all series."""
        return self.test.shape[1]

    @property
    def n_bottom(self) -> int:
        return len(self.bottom_ids)

    @property
    def n_series(self) -> int:
        """Total series count over all levels."""
        return sum(level.n_series for level in self.levels)

    def level(self, index: int) -> Level:
        """Return the level with 1-based ``index``."""
        if not 1 <= index <= self.k:
            raise HierarchyError(f"level index {index} out of range 1..{self.k}")
        return self.levels[index - 1]

    def level_sizes(self) -> dict[int, int]:
        return {level.index: level.n_series for level in self.levels}

    # -- series access ----------------------------------------------------

    def level_train(self, index: int) -> np.ndarray:
        return self.level(index).aggregate(self.train)

    def level_test(self, index: int) -> np.ndarray:
        return self.level(index).aggregate(self.test)

    def get_series(self, series_id: str) -> TimeSeries:
        try:
            level_index, row = self._id_index[series_id]
        except KeyError:
            raise HierarchyError(f"unknown series id {series_id!r}") from None
        level = self.level(level_index)
        selector = level.summing.getrow(row)
        train = np.asarray(selector @ self.train).ravel()
        test = np.asarray(selector @ self.test).ravel()
        return TimeSeries(series_id, level_index, train, test)

    def iter_series(self) -> Iterator[TimeSeries]:
        """Yield every series of every level, most aggregate first."""
        for level in self.levels:
            train = level.aggregate(self.train)
            test = level.aggregate(self.test)
            for row, sid in enumerate(level.ids):
                yield TimeSeries(sid, level.index, train[row], test[row])

    @property
    def parentage(self) -> dict[str, list[str]]:
        """Mapping from every aggregate series id to its bottom constituents."""
        if self._parentage is None:
            mapping: dict[str, list[str]] = {}
            for level in self.levels[:-1] if self.k > 1 else []:
                for sid, rows in zip(level.ids, level.members()):
                    mapping[sid] = [self.bottom_ids[r] for r in rows]
            if self.k == 1 and self.levels[0].ids != self.bottom_ids:
                for sid, rows in zip(self.levels[0].ids, self.levels[0].members()):
                    mapping[sid] = [self.bottom_ids[r] for r in rows]
            self._parentage = mapping
        return self._parentage

    def bottom_index(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.bottom_ids)}

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"HierarchicalDataset(k={self.k}, bottom={self.n_bottom}, "
            f"series={self.n_series}, n={self.n}, h={self.h})"
        )


@dataclass(frozen=True)
class PriceWeights:
    """Dollar-sales weights over every series of a hierarchy.

    ``weights`` sum to 1 over the whole hierarchy and to ``1/k`` within each
    level, because each level's dollar sales partition the grand total.
    ``level_weights`` and ``level_sales`` hold the same numbers as arrays
    aligned with each level's series order, for vectorised scoring.
    """

    weights: dict[str, float]
    dollar_sales: dict[str, float]
    total: float
    level_weights: tuple[np.ndarray, ...] = field(repr=False)
    level_sales: tuple[np.ndarray, ...] = field(repr=False)


def build_hierarchy(
    bottom_series: Sequence[BottomSeries], spec: HierarchySpec
) -> HierarchicalDataset:
    """Assemble a :class:`HierarchicalDataset` from bottom-level records.

    Raises
    ------
    HierarchyError
        On duplicate ids, missing grouping attributes, ragged vector
        lengths, or a last level that does not isolate each bottom series.
    """
    if not bottom_series:
        raise HierarchyError("no bottom series given")
    ids = [series.id for series in bottom_series]
    if len(set(ids)) != len(ids):
        dupes = sorted({sid for sid in ids if ids.count(sid) > 1})
        raise HierarchyError(f"duplicate bottom series ids: {dupes[:5]}")

    n = len(np.atleast_1d(bottom_series[0].train))
    h = len(np.atleast_1d(bottom_series[0].test))
    train = np.empty((len(ids), n), dtype=float)
    test = np.empty((len(ids), h), dtype=float)
    have_price = any(series.price is not None for series in bottom_series)
    revenue = np.zeros((len(ids), n), dtype=float) if have_price else None

    for i, series in enumerate(bottom_series):
        row_train = np.asarray(series.train, dtype=float)
        row_test = np.asarray(series.test, dtype=float)
        if row_train.shape != (n,) or row_test.shape != (h,):
            raise HierarchyError(
                f"series {series.id!r}: every series must share n={n} and h={h}"
            )
        train[i] = row_train
        test[i] = row_test
        if revenue is not None:
            price = series.price
            if price is None:
                log.warning("series %r has no price; its dollar sales are 0", series.id)
                revenue[i] = 0.0
            else:
                price_row = np.broadcast_to(np.asarray(price, dtype=float), (n,))
                if not np.all(np.isfinite(price_row)) or np.any(price_row < 0):
                    raise HierarchyError(f"series {series.id!r}: invalid prices")
                revenue[i] = row_train * price_row

    attrs: dict[str, np.ndarray] = {}
    for name in spec.attributes:
        column = []
        for series in bottom_series:
            if name not in series.attrs:
                raise HierarchyError(
                    f"series {series.id!r} lacks grouping attribute {name!r}"
                )
            column.append(str(series.attrs[name]))
        attrs[name] = np.asarray(column, dtype=object)

    return HierarchicalDataset(spec, ids, attrs, train, test, revenue)


def compute_price_weights(
    dataset: HierarchicalDataset,
    prices: Mapping[str, np.ndarray | float] | None = None,
    window_len: int = 28,
) -> PriceWeights:
    """Dollar-sales weights: ``w_i = (1/k) * sales_i / sales_total``.

    A bottom series' dollar sales are its units sold over the last
    ``window_len`` training days multiplied by the matching prices; an
    aggregate's dollar sales are the sum over its constituents.  When
    ``prices`` is omitted the dataset's own price information (captured at
    build/load time) is used.  Bottom series missing from ``prices`` count
    as zero dollar sales and are reported through a warning.

    Raises
    ------
    ZeroSalesError
        If the grand-total dollar sales are zero.
    """
    if not 1 <= window_len <= dataset.n:
        raise HierarchyError(
            f"window_len={window_len} must lie in 1..n ({dataset.n})"
        )

    if prices is not None:
        window_units = dataset.train[:, dataset.n - window_len :]
        window_revenue = np.zeros_like(window_units)
        missing = []
        for i, sid in enumerate(dataset.bottom_ids):
            if sid not in prices:
                missing.append(sid)
                continue
            price = np.asarray(prices[sid], dtype=float)
            if price.ndim == 0:
                price_window = np.broadcast_to(price, (window_len,))
            elif price.shape == (dataset.n,):
                price_window = price[dataset.n - window_len :]
            elif price.shape == (window_len,):
                price_window = price
            else:
                raise HierarchyError(
                    f"price vector for {sid!r} must be scalar or length n"
                )
            window_revenue[i] = window_units[i] * price_window
        if missing:
            log.warning(
                "%d bottom series without prices treated as zero dollar sales "
                "(first: %s)",
                len(missing),
                ", ".join(missing[:3]),
            )
        bottom_sales = window_revenue.sum(axis=1)
    elif dataset.revenue is not None:
        bottom_sales = dataset.revenue[:, dataset.n - window_len :].sum(axis=1)
    else:
        raise HierarchyError(
            "dataset carries no price information; pass prices= explicitly"
        )

    if np.any(bottom_sales < 0):
        raise HierarchyError("negative dollar sales")
    total = float(bottom_sales.sum())
    if total <= 0.0:
        raise ZeroSalesError("total dollar sales are zero; weights are undefined")

    k = dataset.k
    weights: dict[str, float] = {}
    dollar_sales: dict[str, float] = {}
    level_weights = []
    level_sales = []
    for level in dataset.levels:
        sales = np.asarray(level.summing @ bottom_sales).ravel()
        w = sales / (k * total)
        level_sales.append(sales)
        level_weights.append(w)
        for sid, s, wi in zip(level.ids, sales, w):
            dollar_sales[sid] = float(s)
            weights[sid] = float(wi)
    return PriceWeights(
        weights=weights,
        dollar_sales=dollar_sales,
        total=total,
        level_weights=tuple(level_weights),
        level_sales=tuple(level_sales),
    )


def derive_split_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Derive the sub-seed for split ``index`` from one master seed.

    Uses :class:`numpy.random.SeedSequence` spawn keys as the integer
    mixing function, so split ``r`` is reproducible on its own without
    generating splits ``0..r-1`` first.
    """
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


SeedLike = int | np.random.SeedSequence | np.random.Generator


def _subset(dataset: HierarchicalDataset, rows: np.ndarray) -> HierarchicalDataset:
    return HierarchicalDataset(
        dataset.spec,
        [dataset.bottom_ids[i] for i in rows],
        {name: col[rows] for name, col in dataset.attrs.items()},
        dataset.train[rows],
        dataset.test[rows],
        None if dataset.revenue is None else dataset.revenue[rows],
    )


def split_bottom_half(
    dataset: HierarchicalDataset, seed: SeedLike
) -> tuple[HierarchicalDataset, HierarchicalDataset]:
    """Partition the bottom series uniformly at random into two halves.

    Each half is re-aggregated from its own bottom series under the same
    grouping spec, so it is a standalone dataset of the same nature.  On
    odd counts the first half receives the extra series.  The partition is
    a pure function of ``seed``.
    """
    if dataset.n_bottom < 2:
        raise HierarchyError("need at least 2 bottom series to split")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(dataset.n_bottom)
    size_a = (dataset.n_bottom + 1) // 2
    rows_a = np.sort(order[:size_a])
    rows_b = np.sort(order[size_a:])
    return _subset(dataset, rows_a), _subset(dataset, rows_b)


def split_test_window(
    dataset: HierarchicalDataset, cut: int
) -> tuple[HierarchicalDataset, HierarchicalDataset]:
    """Split the test window at ``cut`` into two datasets sharing history.

    Both datasets keep the full training matrix, so training-based scale
    denominators are identical on each side of the cut.
    """
    if not 1 <= cut < dataset.h:
        raise HierarchyError(f"cut={cut} must lie in 1..h-1 ({dataset.h - 1})")
    first = HierarchicalDataset(
        dataset.spec,
        dataset.bottom_ids,
        dataset.attrs,
        dataset.train,
        dataset.test[:, :cut],
        dataset.revenue,
        _levels=dataset.levels,
    )
    second = HierarchicalDataset(
        dataset.spec,
        dataset.bottom_ids,
        dataset.attrs,
        dataset.train,
        dataset.test[:, cut:],
        dataset.revenue,
        _levels=dataset.levels,
    )
    return first, second


def total_aggregate(dataset: HierarchicalDataset) -> HierarchicalDataset:
    """Collapse the dataset cross-sectionally and temporally to one point.

    The returned dataset holds a single series whose test vector has
    length 1: the sum over all bottom series and all test days.  Its
    training history stays daily (the cross-sectional total per day) so
    that training-based scales remain computable.
    """
    train_total = dataset.train.sum(axis=0, keepdims=True)
    test_total = np.array([[float(dataset.test.sum())]])
    revenue_total = (
        None if dataset.revenue is None else dataset.revenue.sum(axis=0, keepdims=True)
    )
    return HierarchicalDataset(
        HierarchySpec(((),)),
        (TOTAL_ID,),
        {},
        train_total,
        test_total,
        revenue_total,
    )
