"""Domain types shared across the package.

Conventions used throughout:

* categories are labelled 1..Q and ordered;
* ``cumulative`` vectors hold P(X <= q) for q = 1..Q-1 (the trailing 1 for
  q = Q is implicit unless a function says otherwise);
* judgment ranks are labelled 1..H where H is the comparison-set size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "OrdinalDistribution",
    "JpsSample",
    "MultiRankerSample",
    "StratumCounts",
    "EstimateResult",
    "FinitePopulation",
]

_PROB_TOL = 1e-12


def _as_float_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class OrdinalDistribution:
    """Category probabilities of an ordered categorical population.

    ``probs[q-1]`` is P(X = q). The cumulative vector is derived so that
    ``cumulative[q-1] - cumulative[q-2] == probs[q-1]`` holds exactly and the
    final entry is exactly 1.0.
    """

    probs: np.ndarray
    cumulative: np.ndarray = field(init=False)

    def __post_init__(self):
        probs = _as_float_vector(self.probs, "probs")
        if probs.size == 0:
            raise ValueError("need at least one category")
        if np.any(probs <= 0.0):
            raise ValueError(f"every category probability must be > 0, got {probs}")
        total = float(probs.sum())
        if abs(total - 1.0) > _PROB_TOL:
            raise ValueError(f"probabilities must sum to 1 within {_PROB_TOL}, got {total!r}")
        cumulative = np.cumsum(probs)
        cumulative[-1] = 1.0
        # store probs as differences of the cumulative so the identity is exact
        probs = np.diff(cumulative, prepend=0.0)
        if np.any(probs <= 0.0):
            raise ValueError("cumulative probabilities must be strictly increasing")
        probs.flags.writeable = False
        cumulative.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cumulative", cumulative)

    @property
    def num_categories(self) -> int:
        return self.probs.size

    def category_mean(self) -> float:
        """Mean of the category index 1..Q."""
        q = np.arange(1, self.num_categories + 1)
        return float(np.dot(q, self.probs))

    def category_sd(self) -> float:
        """Standard deviation of the category index (0 for a point mass)."""
        q = np.arange(1, self.num_categories + 1)
        m = self.category_mean()
        var = float(np.dot((q - m) ** 2, self.probs))
        return float(np.sqrt(max(var, 0.0)))


def _check_values_ranks(values, ranks, set_size, num_categories, rank_shape):
    values = np.asarray(values, dtype=np.int64)
    ranks = np.asarray(ranks, dtype=np.int64)
    if values.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if ranks.shape != rank_shape:
        raise ValueError(f"ranks must have shape {rank_shape}, got {ranks.shape}")
    if set_size < 1:
        raise ValueError("set_size must be >= 1")
    if num_categories < 1:
        raise ValueError("num_categories must be >= 1")
    if values.size and (values.min() < 1 or values.max() > num_categories):
        raise ValueError(f"values must lie in 1..{num_categories}")
    if ranks.size and (ranks.min() < 1 or ranks.max() > set_size):
        raise ValueError(f"ranks must lie in 1..{set_size}")
    return values, ranks


@dataclass(frozen=True)
class JpsSample:
    """A judgment post-stratified sample: measured values with one rank each."""

    values: np.ndarray
    ranks: np.ndarray
    set_size: int
    num_categories: int

    def __post_init__(self):
        values, ranks = _check_values_ranks(
            self.values, self.ranks, self.set_size, self.num_categories,
            rank_shape=(np.asarray(self.values).shape[0],),
        )
        values.flags.writeable = False
        ranks.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ranks", ranks)

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class MultiRankerSample:
    """Measured values with one judgment rank per ranker.

    ``ranks[i, k]`` is the rank ranker k assigned to unit i within its
    comparison set. ``scores`` holds the rankers' observed values for the
    measured units (one column per ranker); they are what ranker weights and
    the ordinal-regression route are estimated from.
    """

    values: np.ndarray
    ranks: np.ndarray
    set_size: int
    num_categories: int
    scores: Optional[np.ndarray] = None
    ranker_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        if ranks.ndim != 2:
            raise ValueError("ranks must be an (n, K) matrix")
        values, ranks = _check_values_ranks(
            self.values, ranks, self.set_size, self.num_categories, rank_shape=ranks.shape,
        )
        if values.size != ranks.shape[0]:
            raise ValueError("values and ranks disagree on the number of units")
        labels = tuple(self.ranker_labels) or tuple(f"z{k + 1}" for k in range(ranks.shape[1]))
        if len(labels) != ranks.shape[1]:
            raise ValueError("need one label per ranker")
        scores = self.scores
        if scores is not None:
            scores = np.asarray(scores, dtype=float)
            if scores.shape != ranks.shape:
                raise ValueError("scores must have the same shape as ranks")
            scores.flags.writeable = False
        values.flags.writeable = False
        ranks.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "ranker_labels", labels)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def num_rankers(self) -> int:
        return self.ranks.shape[1]

    def single(self, k: int = 0) -> JpsSample:
        """Project onto one ranker's ranks."""
        return JpsSample(
            values=self.values,
            ranks=self.ranks[:, k],
            set_size=self.set_size,
            num_categories=self.num_categories,
        )


@dataclass(frozen=True)
class StratumCounts:
    """Per-stratum cumulative category counts of a JPS sample.

    ``cumulative_counts[h-1, q-1]`` counts units with rank h and value <= q.
    """

    cumulative_counts: np.ndarray
    stratum_sizes: np.ndarray
    total_cumulative: np.ndarray

    def __post_init__(self):
        cc = np.asarray(self.cumulative_counts, dtype=np.int64)
        sizes = np.asarray(self.stratum_sizes, dtype=np.int64)
        tot = np.asarray(self.total_cumulative, dtype=np.int64)
        if cc.ndim != 2 or sizes.shape != (cc.shape[0],) or tot.shape != (cc.shape[1],):
            raise ValueError("inconsistent count shapes")
        if np.any(np.diff(cc, axis=1) < 0):
            raise ValueError("cumulative counts must be non-decreasing across categories")
        if cc.shape[1] and np.any(cc[:, -1] != sizes):
            raise ValueError("each stratum's last cumulative count must equal its size")
        if np.any(cc.sum(axis=0) != tot):
            raise ValueError("total_cumulative must be the column sum over strata")
        for arr in (cc, sizes, tot):
            arr.flags.writeable = False
        object.__setattr__(self, "cumulative_counts", cc)
        object.__setattr__(self, "stratum_sizes", sizes)
        object.__setattr__(self, "total_cumulative", tot)

    @property
    def set_size(self) -> int:
        return self.cumulative_counts.shape[0]

    @property
    def num_categories(self) -> int:
        return self.cumulative_counts.shape[1]

    @property
    def size(self) -> int:
        return int(self.stratum_sizes.sum())

    def nonempty(self) -> np.ndarray:
        """Boolean mask of strata that received at least one unit."""
        return self.stratum_sizes > 0


# largest rounding slack tolerated when validating estimate invariants
_EST_TOL = 1e-9


@dataclass(frozen=True)
class EstimateResult:
    """Estimated cumulative probabilities and the implied category proportions.

    ``cumulative_hat`` has length Q-1; ``proportions_hat`` is its first
    difference against the implicit endpoints 0 and 1, so it always sums to 1.
    """

    cumulative_hat: np.ndarray
    proportions_hat: np.ndarray
    method: str
    diagnostics: Optional[dict] = None

    def __post_init__(self):
        chat = _as_float_vector(self.cumulative_hat, "cumulative_hat")
        phat = _as_float_vector(self.proportions_hat, "proportions_hat")
        if phat.size != chat.size + 1:
            raise ValueError("proportions_hat must have one more entry than cumulative_hat")
        if chat.size and (chat.min() < -_EST_TOL or chat.max() > 1.0 + _EST_TOL):
            raise ValueError(f"cumulative estimates must lie in [0, 1], got {chat}")
        if chat.size > 1 and np.any(np.diff(chat) < -_EST_TOL):
            raise ValueError(f"cumulative estimates must be non-decreasing, got {chat}")
        if np.any(phat < -_EST_TOL):
            raise ValueError(f"proportion estimates must be non-negative, got {phat}")
        chat.flags.writeable = False
        phat.flags.writeable = False
        object.__setattr__(self, "cumulative_hat", chat)
        object.__setattr__(self, "proportions_hat", phat)

    @classmethod
    def from_cumulative(cls, chat, method: str, diagnostics: Optional[dict] = None
                        ) -> "EstimateResult":
        chat = _as_float_vector(chat, "cumulative_hat")
        full = np.concatenate(([0.0], chat, [1.0]))
        return cls(
            cumulative_hat=chat,
            proportions_hat=np.diff(full),
            method=method,
            diagnostics=diagnostics,
        )


@dataclass(frozen=True)
class FinitePopulation:
    """A finite population of categorized outcomes with ranking variables.

    ``x`` holds category labels 1..Q; ``z`` is an (N, K) matrix of ranking
    variables. ``ids`` and ``raw_outcome`` (the pre-categorization scores) are
    kept when the population came from a file so that emitting and
    re-ingesting preserves every record.
    """

    x: np.ndarray
    z: np.ndarray
    num_categories: int
    ids: Optional[np.ndarray] = None
    raw_outcome: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        z = np.asarray(self.z, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("population must contain at least one row")
        if z.ndim != 2 or z.shape[0] != x.size:
            raise ValueError("z must be an (N, K) matrix aligned with x")
        if x.min() < 1 or x.max() > self.num_categories:
            raise ValueError(f"categories must lie in 1..{self.num_categories}")
        if not np.all(np.isfinite(z)):
            raise ValueError("ranking variables must be finite")
        ids = self.ids
        if ids is not None:
            ids = np.asarray(ids)
            if ids.shape != x.shape:
                raise ValueError("ids must align with x")
        raw = self.raw_outcome
        if raw is not None:
            raw = np.asarray(raw, dtype=float)
            if raw.shape != x.shape:
                raise ValueError("raw_outcome must align with x")
        x.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "raw_outcome", raw)

    @property
    def size(self) -> int:
        return self.x.size

    @property
    def num_rankers(self) -> int:
        return self.z.shape[1]

    def proportions(self) -> np.ndarray:
        """Population category proportions (the estimand for bootstrap studies)."""
        counts = np.bincount(self.x, minlength=self.num_categories + 1)[1:]
        return counts / self.size
