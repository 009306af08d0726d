"""Monte-Carlo replication engine for comparing estimators against SRS.

A scenario fixes the population (a category distribution with synthetic
rankers, or a finite population resampled with replacement), the sample and
set sizes, a conditioning scheme, the estimators to run, and a master seed.
Each replication draws one conditioned sample plus one independent simple
random sample of the same size, runs every requested estimator, and records
the squared estimation errors.  Relative efficiency is the ratio of the SRS
total mean squared error to the method's.

Reproducibility contract: replication r of a scenario uses three child
streams spawned from (master_seed, r, 0..2) for the conditioned draw, the
SRS draw, and any estimator-internal randomness.  Seeds bind to replication
indices, never to workers, so serial and parallel runs produce bit-identical
results; the reduction always walks records in index order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .estimators import (
    estimate_iso_combined,
    estimate_iso_drop_empty,
    estimate_iso_maxmin,
    estimate_iso_minmax,
    estimate_ml,
    estimate_srs,
    estimate_standard_jps,
)
from .multiranker import estimate_reg, estimate_sm, estimate_sm_star
from .sampling import (
    CONDITIONING_SCHEMES,
    BootstrapJpsSampler,
    ConditioningExhausted,
    FreshUnitPool,
    InfiniteJpsSampler,
    PopulationPool,
    RankerSpec,
    as_generator,
    condition_sample,
    draw_srs,
)
from .types import FinitePopulation, JpsSample, MultiRankerSample, OrdinalDistribution

__all__ = [
    "METHOD_TAGS",
    "Scenario",
    "ScenarioResult",
    "replication_streams",
    "run_replication",
    "run_scenario",
    "run_grid",
]

# single-ranker tags operate on plain rank vectors; the remaining tags need
# per-ranker scores and therefore at least two rankers in harness scenarios
_SINGLE_TAGS = ("st", "ml", "iso", "iso_minus", "iso_plus", "iso_star")
_MULTI_TAGS = ("sm", "sm_star", "reg")
METHOD_TAGS = ("srs",) + _SINGLE_TAGS + _MULTI_TAGS

_EMPTY_ONLY_TAGS = ("iso_minus", "iso_plus", "iso_star")


@dataclass(frozen=True)
class Scenario:
    """One simulation cell: population, design sizes, methods, seed."""

    n: int
    set_size: int
    methods: Tuple[str, ...]
    replications: int
    master_seed: int
    conditioning: str = "all_categories_present"
    dist: Optional[OrdinalDistribution] = None
    rankers: Tuple[RankerSpec, ...] = ()
    population: Optional[FinitePopulation] = None
    ranker_columns: Tuple[int, ...] = ()
    max_attempts: int = 10_000
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "rankers", tuple(self.rankers))
        object.__setattr__(self, "ranker_columns", tuple(int(c) for c in self.ranker_columns))
        if self.n < 1 or self.set_size < 1:
            raise ValueError("n and set_size must be >= 1")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.conditioning not in CONDITIONING_SCHEMES:
            raise ValueError(
                f"unknown conditioning {self.conditioning!r}; choose from {CONDITIONING_SCHEMES}"
            )
        if (self.dist is None) == (self.population is None):
            raise ValueError("provide exactly one of dist or population")
        if self.dist is not None and not self.rankers:
            raise ValueError("distribution scenarios need at least one ranker")
        if self.population is not None and not self.ranker_columns:
            raise ValueError("population scenarios need at least one ranking column")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHOD_TAGS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHOD_TAGS}")
        k = self.num_rankers
        if k > 1 and self.conditioning in ("no_empty_strata", "at_least_one_empty_stratum"):
            raise ValueError(
                "stratum-occupancy conditioning is defined for single-ranker scenarios"
            )
        if k == 1:
            bad = [m for m in self.methods if m in _MULTI_TAGS]
            if bad:
                raise ValueError(f"methods {bad} need at least two rankers")
        else:
            bad = [m for m in self.methods if m in _SINGLE_TAGS]
            if bad:
                raise ValueError(f"methods {bad} are single-ranker; scenario has {k}")
        if self.conditioning == "no_empty_strata":
            bad = [m for m in self.methods if m in _EMPTY_ONLY_TAGS]
            if bad:
                raise ValueError(
                    f"methods {bad} impute empty strata, which no_empty_strata rules out"
                )

    @property
    def num_rankers(self) -> int:
        return len(self.rankers) if self.dist is not None else len(self.ranker_columns)

    @property
    def num_categories(self) -> int:
        if self.dist is not None:
            return self.dist.num_categories
        return self.population.num_categories

    def true_probs(self) -> np.ndarray:
        if self.dist is not None:
            return self.dist.probs
        return self.population.proportions()

    def output_methods(self) -> Tuple[str, ...]:
        """srs first, then the requested methods in order without duplicates."""
        out = ["srs"]
        for m in self.methods:
            if m not in out:
                out.append(m)
        return tuple(out)


@dataclass
class ScenarioResult:
    """Per-method error summaries for one scenario."""

    scenario: Scenario
    methods: Tuple[str, ...]
    mse: Dict[str, np.ndarray]
    re: Dict[str, float]
    re_se: Dict[str, float]
    completed: int
    fail_conditioning: int
    fail_nonconvergence: Dict[str, int]
    flagged: bool


def replication_streams(master_seed: int, rep_index: int):
    """Child seed sequences for one replication: (jps, srs, estimator)."""
    return (
        np.random.SeedSequence((master_seed, rep_index, 0)),
        np.random.SeedSequence((master_seed, rep_index, 1)),
        np.random.SeedSequence((master_seed, rep_index, 2)),
    )


def _build_sampler(scenario: Scenario):
    if scenario.dist is not None:
        return InfiniteJpsSampler(scenario.dist, scenario.set_size, scenario.rankers)
    return BootstrapJpsSampler(scenario.population, scenario.set_size, scenario.ranker_columns)


def _build_pool(scenario: Scenario):
    if scenario.dist is not None:
        return FreshUnitPool(scenario.dist, scenario.rankers)
    return PopulationPool(scenario.population, scenario.ranker_columns)


def _draw_srs_values(scenario: Scenario, seed) -> np.ndarray:
    if scenario.dist is not None:
        return draw_srs(scenario.dist, scenario.n, seed)
    rng = as_generator(seed)
    idx = rng.integers(0, scenario.population.size, size=scenario.n)
    return scenario.population.x[idx]


def run_replication(scenario: Scenario, rep_index: int) -> dict:
    """One replication: draw, estimate, return per-method proportion vectors.

    The record maps method tags to estimated proportion vectors; a
    replication whose conditioned draw exhausts the retry budget comes back
    with ``skipped`` set and no estimates.  Tags whose optimizer reported
    non-convergence are listed under ``nonconverged`` but their estimates are
    kept.
    """
    jps_seed, srs_seed, est_seed = replication_streams(scenario.master_seed, rep_index)
    sampler = _build_sampler(scenario)
    try:
        sample = condition_sample(
            sampler,
            scenario.conditioning,
            jps_seed,
            n=scenario.n,
            max_attempts=scenario.max_attempts,
        )
    except ConditioningExhausted:
        return {"index": rep_index, "skipped": True, "estimates": {}, "nonconverged": []}

    q_count = scenario.num_categories
    estimates: Dict[str, np.ndarray] = {}
    nonconverged: List[str] = []

    srs_values = _draw_srs_values(scenario, srs_seed)
    estimates["srs"] = estimate_srs(srs_values, q_count).proportions_hat

    for tag in scenario.output_methods():
        if tag == "srs":
            continue
        if tag == "st":
            result = estimate_standard_jps(sample)
        elif tag == "ml":
            result = estimate_ml(sample)
            if not result.diagnostics["converged"]:
                nonconverged.append(tag)
        elif tag == "iso":
            result = estimate_iso_drop_empty(sample)
        elif tag == "iso_minus":
            result = estimate_iso_minmax(sample)
        elif tag == "iso_plus":
            result = estimate_iso_maxmin(sample)
        elif tag == "iso_star":
            result = estimate_iso_combined(sample)
        elif tag == "sm":
            result = estimate_sm(sample)
        elif tag == "sm_star":
            result = estimate_sm_star(sample)
        elif tag == "reg":
            result = estimate_reg(
                sample.values,
                sample.scores,
                _build_pool(scenario),
                scenario.set_size,
                est_seed,
                num_categories=q_count,
            )
            olr = result.diagnostics["olr"]
            if olr is not None and not olr["converged"]:
                nonconverged.append(tag)
        else:
            raise AssertionError(f"unhandled method tag {tag!r}")
        estimates[tag] = result.proportions_hat

    return {
        "index": rep_index,
        "skipped": False,
        "estimates": estimates,
        "nonconverged": nonconverged,
    }


def _replication_chunk(scenario: Scenario, start: int, stop: int) -> List[dict]:
    return [run_replication(scenario, i) for i in range(start, stop)]


def _reduce_records(scenario: Scenario, records: List[dict]) -> ScenarioResult:
    methods = scenario.output_methods()
    true_p = scenario.true_probs()
    kept = [r for r in sorted(records, key=lambda r: r["index"]) if not r["skipped"]]
    completed = len(kept)
    fail_conditioning = scenario.replications - completed
    fail_nonconvergence = {m: 0 for m in methods}
    for r in kept:
        for m in r["nonconverged"]:
            fail_nonconvergence[m] += 1

    mse: Dict[str, np.ndarray] = {}
    re: Dict[str, float] = {}
    re_se: Dict[str, float] = {}
    if completed == 0:
        for m in methods:
            mse[m] = np.full(true_p.size, np.nan)
            re[m] = float("nan")
            re_se[m] = float("nan")
    else:
        sq = {
            m: np.array([(r["estimates"][m] - true_p) ** 2 for r in kept])
            for m in methods
        }
        totals = {m: sq[m].sum(axis=1) for m in methods}
        t_srs = totals["srs"]
        mean_srs = float(t_srs.mean())
        for m in methods:
            mse[m] = sq[m].mean(axis=0)
            t_m = totals[m]
            mean_m = float(t_m.mean())
            if mean_m == 0.0:
                re[m] = 1.0 if mean_srs == 0.0 else float("inf")
                re_se[m] = 0.0
                continue
            ratio = mean_srs / mean_m
            re[m] = ratio
            if completed < 2 or mean_srs == 0.0:
                re_se[m] = 0.0
                continue
            var_s = float(t_srs.var(ddof=1))
            var_m = float(t_m.var(ddof=1))
            cov = float(np.cov(t_srs, t_m, ddof=1)[0, 1])
            rel = var_s / mean_srs**2 + var_m / mean_m**2 - 2.0 * cov / (mean_srs * mean_m)
            re_se[m] = ratio * np.sqrt(max(0.0, rel) / completed)

    flagged = fail_conditioning > 0.1 * scenario.replications
    return ScenarioResult(
        scenario=scenario,
        methods=methods,
        mse=mse,
        re=re,
        re_se=re_se,
        completed=completed,
        fail_conditioning=fail_conditioning,
        fail_nonconvergence=fail_nonconvergence,
        flagged=flagged,
    )


def run_scenario(scenario: Scenario, workers: int = 1) -> ScenarioResult:
    """Run every replication of one scenario and reduce to a result.

    ``workers`` > 1 spreads contiguous replication-index chunks over a
    process pool; the reduction is identical either way.
    """
    r_total = scenario.replications
    if workers <= 1 or r_total == 1:
        records = _replication_chunk(scenario, 0, r_total)
    else:
        workers = min(workers, r_total)
        bounds = np.linspace(0, r_total, workers + 1).astype(int)
        records = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_replication_chunk, scenario, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            for fut in futures:
                records.extend(fut.result())
    return _reduce_records(scenario, records)


def run_grid(scenarios: Sequence[Scenario], workers: int = 1) -> List[ScenarioResult]:
    """Run scenarios in order; output order matches input order."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    return [run_scenario(s, workers=workers) for s in scenarios]
