"""Method rankings, Spearman rank similarity and top-K subsetting.

Scores are turned into fractional ranks (rank 1 = lowest error, ties get
the average of the tied positions).  Two rankings over the same methods
are compared with the Pearson correlation of their rank vectors, which is
Spearman's rank correlation and stays well defined under ties.  A ranking
with zero variance (every method tied) has no defined correlation; such
comparisons return the :data:`DEGENERATE` flag instead of a number.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata


class RankingError(ValueError):
    """Raised on malformed scores or mismatched rankings."""


class Degenerate:
    """Flag for an undefined rank correlation (all methods tied)."""

    _instance: "Degenerate | None" = None

    def __new__(cls) -> "Degenerate":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "*"


#: Singleton returned instead of a correlation when ranks have no variance.
DEGENERATE = Degenerate()


@dataclass(frozen=True)
class RankedMethod:
    method_id: str
    score: float
    rank: float


@dataclass(frozen=True)
class Ranking:
    """Fractional ranks for a set of methods, best (lowest error) first."""

    entries: tuple[RankedMethod, ...]

    @property
    def method_ids(self) -> tuple[str, ...]:
        return tuple(entry.method_id for entry in self.entries)

    def rank_of(self, method_id: str) -> float:
        for entry in self.entries:
            if entry.method_id == method_id:
                return entry.rank
        raise RankingError(f"method {method_id!r} not in ranking")

    def rank_vector(self, order: Sequence[str] | None = None) -> np.ndarray:
        """Ranks as an array, following ``order`` (default: entry order)."""
        table = {entry.method_id: entry.rank for entry in self.entries}
        ids = self.method_ids if order is None else tuple(order)
        try:
            return np.array([table[mid] for mid in ids], dtype=float)
        except KeyError as exc:
            raise RankingError(f"method {exc.args[0]!r} not in ranking") from None

    def __len__(self) -> int:
        return len(self.entries)


def rank_methods(scores: Mapping[str, float]) -> Ranking:
    """Rank methods by ascending score with average ranks for ties.

    Raises
    ------
    RankingError
        With fewer than two methods, or when a score is NaN (the failing
        method is named).
    """
    if len(scores) < 2:
        raise RankingError("need at least 2 methods to rank")
    ids = list(scores)
    values = np.array([float(scores[mid]) for mid in ids])
    for mid, value in zip(ids, values):
        if math.isnan(value):
            raise RankingError(f"score for method {mid!r} is NaN")
    ranks = rankdata(values, method="average")
    order = np.lexsort((ids, ranks))
    entries = tuple(
        RankedMethod(ids[i], float(values[i]), float(ranks[i])) for i in order
    )
    return Ranking(entries)


def spearman(r1: Ranking, r2: Ranking) -> float | Degenerate:
    """Rank similarity: Pearson correlation of the two rank vectors.

    Both rankings must cover the same method set.  Returns
    :data:`DEGENERATE` when either ranking is fully tied.
    """
    ids = sorted(r1.method_ids)
    if sorted(r2.method_ids) != ids:
        raise RankingError("rankings cover different method sets")
    if len(ids) < 2:
        raise RankingError("need at least 2 methods to correlate")
    a = r1.rank_vector(ids)
    b = r2.rank_vector(ids)
    a_centered = a - a.mean()
    b_centered = b - b.mean()
    var_a = float(a_centered @ a_centered)
    var_b = float(b_centered @ b_centered)
    if var_a == 0.0 or var_b == 0.0:
        return DEGENERATE
    value = float(a_centered @ b_centered) / math.sqrt(var_a * var_b)
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True)
class ReferenceRanking:
    """Fixed method order (best first) used for a-priori top-K subsetting."""

    method_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        ids = tuple(self.method_ids)
        object.__setattr__(self, "method_ids", ids)
        if len(set(ids)) != len(ids):
            raise RankingError("reference ranking contains duplicate method ids")
        if not ids:
            raise RankingError("reference ranking is empty")

    @classmethod
    def from_file(cls, path: str | Path) -> "ReferenceRanking":
        """Read one method id per line; blank lines and '#' comments skipped."""
        ids = []
        for line in Path(path).read_text().splitlines():
            text = line.strip()
            if text and not text.startswith("#"):
                ids.append(text.split(",")[0].strip())
        return cls(tuple(ids))

    def top(self, k: int) -> tuple[str, ...]:
        if not 1 <= k <= len(self.method_ids):
            raise RankingError(
                f"k={k} outside 1..{len(self.method_ids)} reference methods"
            )
        return self.method_ids[:k]

    def __len__(self) -> int:
        return len(self.method_ids)


def top_k_subset(
    reference: ReferenceRanking, k: int, scores: Mapping[str, float]
) -> dict[str, float]:
    """Restrict ``scores`` to the ``k`` best methods of ``reference``.

    Subsetting happens a priori, before any re-ranking: the caller ranks
    the returned scores within the subset.
    """
    subset = {}
    for mid in reference.top(k):
        if mid not in scores:
            raise RankingError(f"reference method {mid!r} missing from scores")
        subset[mid] = scores[mid]
    return subset


def correlation_or_flag(value: float | Degenerate) -> float | None:
    """Map a correlation to a JSON-friendly value (None encodes the flag)."""
    return None if isinstance(value, Degenerate) else float(value)


def mean_correlation(values: Iterable[float | None]) -> float | None:
    """Mean of defined correlations; None when every value is flagged."""
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return float(np.mean(defined))
