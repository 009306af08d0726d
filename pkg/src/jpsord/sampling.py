"""Sample generation: SRS draws, judgment post-stratified draws with one or
several rankers, finite-population bootstrap, and conditioned sampling.

Randomness contract
-------------------
Every public entry point takes a ``seed`` that may be an int, a
``numpy.random.SeedSequence``, or an existing ``numpy.random.Generator``;
identical seeds and arguments give bit-identical output. Within one batch of
units the stream is consumed in a fixed documented order:

1. measured-unit values (one uniform each, inverse-cdf),
2. comparison-set values (H-1 uniforms per unit),
3. per ranker, in order: concomitant noise for every set member (measured
   unit first) when the ranker is a concomitant, then one tie-breaking
   uniform per set member.

Judgment ranks order the comparison set by (score, tie-break uniform)
lexicographically, so exact score ties are resolved uniformly at random and
the rank of the measured unit is marginally uniform on 1..H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .types import FinitePopulation, JpsSample, MultiRankerSample, OrdinalDistribution

__all__ = [
    "RankerSpec",
    "ConditioningExhausted",
    "CONDITIONING_SCHEMES",
    "draw_srs",
    "gen_concomitant",
    "draw_jps",
    "draw_jps_multi",
    "bootstrap_population",
    "condition_sample",
    "InfiniteJpsSampler",
    "BootstrapJpsSampler",
    "FreshUnitPool",
    "PopulationPool",
]

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

CONDITIONING_SCHEMES = (
    "all_categories_present",
    "no_empty_strata",
    "at_least_one_empty_stratum",
)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class ConditioningExhausted(RuntimeError):
    """Raised when a conditioning scheme uses up its attempt budget."""

    def __init__(self, scheme: str, attempts: int):
        super().__init__(
            f"conditioning scheme {scheme!r} not satisfied within {attempts} attempts"
        )
        self.scheme = scheme
        self.attempts = attempts


@dataclass(frozen=True)
class RankerSpec:
    """How one ranker orders a comparison set.

    ``kind`` is ``"perfect"`` (ranks by the latent value itself) or
    ``"concomitant"`` (ranks by a noisy linear concomitant with correlation
    ``rho`` to the value).
    """

    kind: str
    rho: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("perfect", "concomitant"):
            raise ValueError(f"unknown ranker kind {self.kind!r}")
        if self.kind == "concomitant":
            if self.rho is None or not -1.0 <= float(self.rho) <= 1.0:
                raise ValueError(f"concomitant ranker needs rho in [-1, 1], got {self.rho!r}")
            object.__setattr__(self, "rho", float(self.rho))

    @classmethod
    def perfect(cls, label: str = "") -> "RankerSpec":
        return cls(kind="perfect", label=label)

    @classmethod
    def concomitant(cls, rho: float, label: str = "") -> "RankerSpec":
        return cls(kind="concomitant", rho=rho, label=label)

    def describe(self) -> str:
        return "perfect" if self.kind == "perfect" else f"{self.rho:g}"


def draw_srs(dist: OrdinalDistribution, n: int, seed: SeedLike) -> np.ndarray:
    """Simple random sample of n category labels from ``dist`` (inverse cdf)."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = as_generator(seed)
    u = rng.random(n)
    return _values_from_uniforms(dist, u)


def _values_from_uniforms(dist: OrdinalDistribution, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(dist.cumulative, u, side="right").astype(np.int64) + 1


def gen_concomitant(x, dist: OrdinalDistribution, rho: float, stream: SeedLike):
    """Concomitant ranking variable for category values ``x``.

    Z = rho * (x - mean) / sd + eps * sqrt(1 - rho^2) with eps standard
    normal, using the population mean and standard deviation of the category
    index under ``dist``. The noise is always drawn (even at |rho| = 1) so the
    stream layout does not depend on rho.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho!r}")
    sd = dist.category_sd()
    if sd <= 0.0:
        raise ValueError("distribution has zero variance; concomitant undefined")
    rng = as_generator(stream)
    x = np.asarray(x, dtype=float)
    eps = rng.standard_normal(x.shape)
    return rho * (x - dist.category_mean()) / sd + eps * math.sqrt(max(0.0, 1.0 - rho * rho))


def _lex_ranks(scores: np.ndarray, tiebreak: np.ndarray) -> np.ndarray:
    """Rank of column 0 within each row by (score, tiebreak) ascending."""
    s0 = scores[:, :1]
    u0 = tiebreak[:, :1]
    rest_s = scores[:, 1:]
    rest_u = tiebreak[:, 1:]
    below = (rest_s < s0) | ((rest_s == s0) & (rest_u < u0))
    return below.sum(axis=1).astype(np.int64) + 1


class InfiniteJpsSampler:
    """Draws JPS units from an ordinal distribution with the given rankers."""

    def __init__(self, dist: OrdinalDistribution, set_size: int,
                 rankers: Sequence[RankerSpec]):
        if set_size < 1:
            raise ValueError(f"set_size must be >= 1, got {set_size}")
        rankers = tuple(rankers)
        if not rankers:
            raise ValueError("need at least one ranker")
        if any(r.kind == "concomitant" for r in rankers) and dist.category_sd() <= 0.0:
            raise ValueError("concomitant ranking needs a non-degenerate distribution")
        self.dist = dist
        self.set_size = int(set_size)
        self.rankers = rankers
        self.labels = tuple(
            r.label or (f"z{k + 1}" if r.kind == "concomitant" else f"perfect{k + 1}")
            for k, r in enumerate(rankers)
        )

    @property
    def num_rankers(self) -> int:
        return len(self.rankers)

    @property
    def num_categories(self) -> int:
        return self.dist.num_categories

    def draw_units(self, m: int, rng: np.random.Generator):
        """Draw m units: returns (values, ranks (m, K), measured scores (m, K))."""
        H = self.set_size
        values = _values_from_uniforms(self.dist, rng.random(m))
        comps = _values_from_uniforms(
            self.dist, rng.random((m, H - 1))) if H > 1 else np.empty((m, 0), dtype=np.int64)
        all_values = np.column_stack([values, comps]).astype(float)
        K = len(self.rankers)
        ranks = np.empty((m, K), dtype=np.int64)
        scores = np.empty((m, K))
        for k, ranker in enumerate(self.rankers):
            if ranker.kind == "perfect":
                s = all_values
            else:
                s = gen_concomitant(all_values, self.dist, ranker.rho, rng)
            tb = rng.random((m, H))
            ranks[:, k] = _lex_ranks(s, tb)
            scores[:, k] = s[:, 0]
        return values, ranks, scores

    def draw(self, n: int, rng: np.random.Generator):
        values, ranks, scores = self.draw_units(n, rng)
        return self.bundle(values, ranks, scores)

    def bundle(self, values, ranks, scores):
        if self.num_rankers == 1:
            return JpsSample(
                values=values, ranks=ranks[:, 0],
                set_size=self.set_size, num_categories=self.num_categories,
            )
        return MultiRankerSample(
            values=values, ranks=ranks,
            set_size=self.set_size, num_categories=self.num_categories,
            scores=scores, ranker_labels=self.labels,
        )


class BootstrapJpsSampler:
    """Draws JPS units by resampling a finite population with replacement.

    Comparison sets are fresh rows drawn with replacement; each designated
    ranking column orders its set (ties broken uniformly at random), so a
    column equal to the outcome behaves as a perfect ranker with ties.
    """

    def __init__(self, population: FinitePopulation, set_size: int,
                 ranker_columns: Sequence[int]):
        if set_size < 1:
            raise ValueError(f"set_size must be >= 1, got {set_size}")
        columns = tuple(int(c) for c in ranker_columns)
        if not columns:
            raise ValueError("need at least one ranking column")
        for c in columns:
            if not 0 <= c < population.num_rankers:
                raise ValueError(f"ranking column {c} out of range 0..{population.num_rankers - 1}")
        self.population = population
        self.set_size = int(set_size)
        self.columns = columns
        self.labels = tuple(f"z{c + 1}" for c in columns)

    @property
    def num_rankers(self) -> int:
        return len(self.columns)

    @property
    def num_categories(self) -> int:
        return self.population.num_categories

    def draw_units(self, m: int, rng: np.random.Generator):
        H = self.set_size
        N = self.population.size
        idx = rng.integers(0, N, size=m)
        comp_idx = rng.integers(0, N, size=(m, H - 1)) if H > 1 else np.empty((m, 0), dtype=np.int64)
        all_idx = np.column_stack([idx, comp_idx])
        values = self.population.x[idx]
        K = len(self.columns)
        ranks = np.empty((m, K), dtype=np.int64)
        scores = np.empty((m, K))
        for k, col in enumerate(self.columns):
            s = self.population.z[all_idx, col]
            tb = rng.random((m, H))
            ranks[:, k] = _lex_ranks(s, tb)
            scores[:, k] = s[:, 0]
        return values, ranks, scores

    def draw(self, n: int, rng: np.random.Generator):
        values, ranks, scores = self.draw_units(n, rng)
        return self.bundle(values, ranks, scores)

    def bundle(self, values, ranks, scores):
        if self.num_rankers == 1:
            return JpsSample(
                values=values, ranks=ranks[:, 0],
                set_size=self.set_size, num_categories=self.num_categories,
            )
        return MultiRankerSample(
            values=values, ranks=ranks,
            set_size=self.set_size, num_categories=self.num_categories,
            scores=scores, ranker_labels=self.labels,
        )


def draw_jps(dist: OrdinalDistribution, n: int, set_size: int,
             ranker: RankerSpec, seed: SeedLike) -> JpsSample:
    """Judgment post-stratified sample of n measured units.

    Each unit is measured together with ``set_size - 1`` unmeasured
    comparison draws and receives the rank the ranker assigns it within that
    set. Only values and ranks are retained.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    sampler = InfiniteJpsSampler(dist, set_size, [ranker])
    return sampler.draw(n, as_generator(seed))


def draw_jps_multi(dist: OrdinalDistribution, n: int, set_size: int,
                   rankers: Sequence[RankerSpec], seed: SeedLike) -> MultiRankerSample:
    """JPS sample where all rankers judge the same comparison sets.

    With a single ranker this consumes the stream exactly like ``draw_jps``.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    sampler = InfiniteJpsSampler(dist, set_size, rankers)
    values, ranks, scores = sampler.draw_units(n, as_generator(seed))
    return MultiRankerSample(
        values=values, ranks=ranks, set_size=sampler.set_size,
        num_categories=sampler.num_categories, scores=scores,
        ranker_labels=sampler.labels,
    )


def bootstrap_population(population: FinitePopulation, n: int, set_size: int,
                         ranker_columns: Sequence[int], seed: SeedLike):
    """Bootstrap JPS sample from a finite population (with replacement)."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    sampler = BootstrapJpsSampler(population, set_size, ranker_columns)
    return sampler.draw(n, as_generator(seed))


def _all_categories_present(values: np.ndarray, num_categories: int) -> bool:
    return np.bincount(values, minlength=num_categories + 1)[1:].min() > 0


def _empty_strata_mask(ranks: np.ndarray, set_size: int) -> np.ndarray:
    return np.bincount(ranks, minlength=set_size + 1)[1:] == 0


def _propose_empty_design(set_size: int, rng: np.random.Generator,
                          max_attempts: int) -> np.ndarray:
    """Candidate set of empty strata: uniform over non-empty proper subsets,
    accepted with probability 1/|subset| to favour fewer empty strata."""
    for _ in range(max_attempts):
        mask_bits = int(rng.integers(1, 2 ** set_size - 1))
        members = np.array(
            [(mask_bits >> h) & 1 == 1 for h in range(set_size)], dtype=bool)
        if rng.random() < 1.0 / members.sum():
            return members
    raise ConditioningExhausted("at_least_one_empty_stratum", max_attempts)


def condition_sample(sampler, scheme: str, seed: SeedLike, *, n: int,
                     max_attempts: int = 10_000):
    """Draw from ``sampler`` until the conditioning scheme is satisfied.

    Schemes (every scheme also requires all categories present among the
    measured values, which form the initial simple random sample):

    * ``all_categories_present`` - nothing further;
    * ``no_empty_strata`` - every judgment stratum received a unit;
    * ``at_least_one_empty_stratum`` - first fixes a candidate design (see
      ``_propose_empty_design``), then samples until the realized set of
      empty strata matches the design exactly. Units whose rank falls in the
      designated empty strata are rejected one by one, which draws from the
      same conditional law as whole-sample rejection but remains feasible
      when empty strata are rare.

    Raises ``ConditioningExhausted`` after ``max_attempts`` whole-sample
    attempts.
    """
    if scheme not in CONDITIONING_SCHEMES:
        raise ValueError(f"unknown conditioning scheme {scheme!r}; "
                         f"expected one of {CONDITIONING_SCHEMES}")
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = as_generator(seed)
    Q = sampler.num_categories
    H = sampler.set_size

    if scheme in ("no_empty_strata", "at_least_one_empty_stratum"):
        if sampler.num_rankers != 1:
            raise ValueError(f"scheme {scheme!r} is defined for single-ranker samplers")
        if scheme == "no_empty_strata" and n < H:
            raise ValueError(f"no_empty_strata is impossible with n={n} < set_size={H}")
        if scheme == "at_least_one_empty_stratum" and H < 2:
            raise ValueError("at_least_one_empty_stratum needs set_size >= 2")

    if scheme != "at_least_one_empty_stratum":
        for _ in range(max_attempts):
            values, ranks, scores = sampler.draw_units(n, rng)
            if not _all_categories_present(values, Q):
                continue
            if scheme == "no_empty_strata" and _empty_strata_mask(ranks[:, 0], H).any():
                continue
            return sampler.bundle(values, ranks, scores)
        raise ConditioningExhausted(scheme, max_attempts)

    design = _propose_empty_design(H, rng, max_attempts)
    keep_prob = 1.0 - design.sum() / H
    for _ in range(max_attempts):
        kept_v, kept_r, kept_s = [], [], []
        kept = 0
        assembled = False
        for _ in range(max_attempts):
            need = n - kept
            batch = max(8, math.ceil(need / keep_prob))
            values, ranks, scores = sampler.draw_units(batch, rng)
            ok = ~design[ranks[:, 0] - 1]
            if ok.any():
                kept_v.append(values[ok])
                kept_r.append(ranks[ok])
                kept_s.append(scores[ok])
                kept += int(ok.sum())
            if kept >= n:
                assembled = True
                break
        if not assembled:
            raise ConditioningExhausted(scheme, max_attempts)
        values = np.concatenate(kept_v)[:n]
        ranks = np.concatenate(kept_r)[:n]
        scores = np.concatenate(kept_s)[:n]
        realized = _empty_strata_mask(ranks[:, 0], H)
        if np.array_equal(realized, design) and _all_categories_present(values, Q):
            return sampler.bundle(values, ranks, scores)
    raise ConditioningExhausted(scheme, max_attempts)


@dataclass(frozen=True)
class FreshUnitPool:
    """Comparison-unit source backed by an ordinal distribution.

    ``draw_z(m, rng)`` materializes m fresh unmeasured units and returns their
    ranking-variable values, one column per ranker (a perfect ranker's column
    is the latent value itself).
    """

    dist: OrdinalDistribution
    rankers: Tuple[RankerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "rankers", tuple(self.rankers))
        if not self.rankers:
            raise ValueError("need at least one ranker")

    @property
    def num_rankers(self) -> int:
        return len(self.rankers)

    def draw_z(self, m: int, rng: np.random.Generator) -> np.ndarray:
        x = _values_from_uniforms(self.dist, rng.random(m)).astype(float)
        cols = []
        for ranker in self.rankers:
            if ranker.kind == "perfect":
                cols.append(x.copy())
            else:
                cols.append(gen_concomitant(x, self.dist, ranker.rho, rng))
        return np.column_stack(cols)


@dataclass(frozen=True)
class PopulationPool:
    """Comparison-unit source that resamples rows of a finite population."""

    population: FinitePopulation
    columns: Tuple[int, ...]

    def __post_init__(self):
        columns = tuple(int(c) for c in self.columns)
        if not columns:
            raise ValueError("need at least one ranking column")
        object.__setattr__(self, "columns", columns)

    @property
    def num_rankers(self) -> int:
        return len(self.columns)

    def draw_z(self, m: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.population.size, size=m)
        return self.population.z[np.ix_(idx, self.columns)]
