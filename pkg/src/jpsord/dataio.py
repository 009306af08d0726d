"""File formats: population CSV, sample CSV, simulation config, result CSVs.

Population files carry one row per individual with an identifier, a raw
outcome score that a categorization rule maps into ordered categories, and
one or more ranking-score columns.  Sample files carry measured categories
with their judgment ranks.  Simulation configs are TOML with explicit
scenario blocks and grid blocks that expand into scenario lists.  All CSV
emitters format floats with ``repr`` and a fixed header so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .harness import METHOD_TAGS, Scenario, ScenarioResult
from .sampling import CONDITIONING_SCHEMES, RankerSpec
from .types import EstimateResult, FinitePopulation, OrdinalDistribution

__all__ = [
    "CategorizationRule",
    "BmdRecord",
    "categorize",
    "read_bmd_records",
    "ingest_population",
    "population_summary",
    "emit_population",
    "make_surrogate_population",
    "read_sample_csv",
    "load_config",
    "expand_config",
    "scenario_seed",
    "write_simulation_csv",
    "write_estimates_csv",
    "write_bmd_csv",
]

log = logging.getLogger("jpsord")

DEFAULT_THRESHOLDS = (0.55, 0.79)


@dataclass(frozen=True)
class CategorizationRule:
    """Cut points mapping a raw score to ordered categories.

    Category 1 is everything at or below the first threshold; the last
    category is everything strictly above the final one.
    """

    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        if not thresholds:
            raise ValueError("need at least one threshold")
        if any(not math.isfinite(t) for t in thresholds):
            raise ValueError(f"thresholds must be finite, got {thresholds}")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {thresholds}")
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def num_categories(self) -> int:
        return len(self.thresholds) + 1


@dataclass(frozen=True)
class BmdRecord:
    """One parsed population row: identifier, outcome score, ranking scores."""

    id: str
    outcome_score: float
    ranking_scores: Tuple[float, ...]


def categorize(score: float, rule: Optional[CategorizationRule] = None) -> int:
    """Ordered category of a raw score under the rule (defaults shipped)."""
    rule = rule if rule is not None else CategorizationRule()
    score = float(score)
    if math.isnan(score):
        raise ValueError("cannot categorize NaN")
    return int(np.searchsorted(rule.thresholds, score, side="left")) + 1


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"row {row}: column {column!r} is not numeric: {text!r}") from None
    if math.isnan(value):
        raise ValueError(f"row {row}: column {column!r} is NaN")
    return value


def read_bmd_records(
    path,
    id_column: str = "id",
    outcome_column: str = "outcome",
    ranking_columns: Optional[Sequence[str]] = None,
) -> List[BmdRecord]:
    """Parse a population CSV into records, with row-numbered diagnostics.

    Row numbers in error messages count the header as line 1.  When
    ``ranking_columns`` is omitted, every column named ``z1``, ``z2``, ... is
    used in header order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = list(reader.fieldnames)
        if ranking_columns is None:
            ranking_columns = [c for c in header if c.startswith("z") and c[1:].isdigit()]
        missing = [c for c in [id_column, outcome_column, *ranking_columns] if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}; header has {header}")
        if not ranking_columns:
            raise ValueError(f"{path}: no ranking columns found (expected z1, z2, ...)")
        records = []
        for lineno, row in enumerate(reader, start=2):
            outcome = _parse_float(row[outcome_column], lineno, outcome_column)
            scores = tuple(_parse_float(row[c], lineno, c) for c in ranking_columns)
            records.append(BmdRecord(id=row[id_column], outcome_score=outcome, ranking_scores=scores))
    if not records:
        raise ValueError(f"{path}: no data rows")
    widths = {len(r.ranking_scores) for r in records}
    if len(widths) != 1:
        raise ValueError(f"{path}: inconsistent ranking column count {sorted(widths)}")
    return records


def _records_to_population(records: List[BmdRecord], rule: CategorizationRule) -> FinitePopulation:
    x = np.array([categorize(r.outcome_score, rule) for r in records], dtype=np.int64)
    z = np.array([r.ranking_scores for r in records], dtype=float)
    raw = np.array([r.outcome_score for r in records], dtype=float)
    ids = tuple(r.id for r in records)
    return FinitePopulation(
        x=x, z=z, num_categories=rule.num_categories, ids=ids, raw_outcome=raw
    )


def ingest_population(
    path,
    id_column: str = "id",
    outcome_column: str = "outcome",
    ranking_columns: Optional[Sequence[str]] = None,
    rule: Optional[CategorizationRule] = None,
) -> FinitePopulation:
    """Read a population CSV, categorize outcomes, and log a summary."""
    rule = rule if rule is not None else CategorizationRule()
    records = read_bmd_records(path, id_column, outcome_column, ranking_columns)
    pop = _records_to_population(records, rule)
    summary = population_summary(pop)
    log.info(
        "ingested %d rows; proportions %s; ranker correlations %s",
        summary["rows"],
        np.round(summary["proportions"], 4).tolist(),
        np.round(summary["correlations"], 4).tolist(),
    )
    return pop


def population_summary(pop: FinitePopulation) -> dict:
    """Row count, category proportions, and ranker-vs-category correlations."""
    x = pop.x.astype(float)
    xc = x - x.mean()
    xnorm = float(xc @ xc)
    corrs = []
    for k in range(pop.num_rankers):
        zc = pop.z[:, k] - pop.z[:, k].mean()
        denom = math.sqrt(xnorm * float(zc @ zc))
        corrs.append(float(xc @ zc) / denom if denom > 0.0 else 0.0)
    return {
        "rows": pop.size,
        "proportions": pop.proportions(),
        "correlations": np.array(corrs),
    }


def emit_population(pop: FinitePopulation, path) -> None:
    """Write a population back to CSV in the ingestible layout."""
    k = pop.num_rankers
    header = ["id", "outcome"] + [f"z{j + 1}" for j in range(k)]
    ids = pop.ids if pop.ids is not None else tuple(str(i) for i in range(pop.size))
    outcome = pop.raw_outcome if pop.raw_outcome is not None else pop.x
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(pop.size):
            writer.writerow(
                [ids[i], repr(float(outcome[i]))] + [repr(float(v)) for v in pop.z[i]]
            )


def make_surrogate_population(
    seed,
    rows: int = 234,
    counts: Tuple[int, ...] = (19, 154, 61),
    correlations: Tuple[float, ...] = (0.86, 0.70),
    rule: Optional[CategorizationRule] = None,
) -> FinitePopulation:
    """Synthetic stand-in population with prescribed category counts.

    The category counts fix the proportions exactly; each ranking column is
    constructed by mixing the standardized category index with an
    orthogonalized noise vector, so its sample correlation with the category
    index equals the requested value up to floating-point rounding.  Raw
    outcome scores are drawn uniformly inside each category's band of the
    categorization rule.  Every value is synthetic.
    """
    rule = rule if rule is not None else CategorizationRule()
    counts = tuple(int(c) for c in counts)
    if len(counts) != rule.num_categories:
        raise ValueError(f"need {rule.num_categories} category counts, got {len(counts)}")
    if any(c < 2 for c in counts):
        raise ValueError(f"each category needs at least 2 rows, got {counts}")
    if sum(counts) != rows:
        raise ValueError(f"counts {counts} sum to {sum(counts)}, expected rows={rows}")
    if any(not -1.0 < r < 1.0 for r in correlations):
        raise ValueError(f"target correlations must lie in (-1, 1), got {correlations}")

    rng = np.random.default_rng(seed)
    x = np.repeat(np.arange(1, len(counts) + 1), counts)
    x = x[rng.permutation(rows)]

    # raw scores inside each category's band; outer bands get unit width
    cuts = rule.thresholds
    lows = (cuts[0] - 1.0,) + cuts
    highs = cuts + (cuts[-1] + 1.0,)
    raw = np.empty(rows)
    for q in range(rule.num_categories):
        mask = x == q + 1
        raw[mask] = rng.uniform(lows[q], highs[q], size=int(mask.sum()))
        if q > 0:
            # the band is half-open on the left; nudge any exact boundary hit
            raw[mask] = np.maximum(raw[mask], np.nextafter(lows[q], np.inf))

    xc = x - x.mean()
    x_std = xc / math.sqrt(float(xc @ xc) / rows)
    z = np.empty((rows, len(correlations)))
    for k, r in enumerate(correlations):
        e = rng.standard_normal(rows)
        e = e - e.mean()
        e = e - (float(e @ x_std) / float(x_std @ x_std)) * x_std
        e = e / math.sqrt(float(e @ e) / rows)
        z[:, k] = r * x_std + math.sqrt(1.0 - r * r) * e

    ids = tuple(f"s{i + 1:04d}" for i in range(rows))
    return FinitePopulation(
        x=x, z=z, num_categories=rule.num_categories, ids=ids, raw_outcome=raw
    )


def read_sample_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read measured categories and judgment ranks from a sample CSV.

    The file needs a ``value`` column and either a single ``rank`` column or
    ``rank_1`` .. ``rank_K``.  Returns (values, ranks) with ranks shaped
    (n, K).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = list(reader.fieldnames)
        if "value" not in header:
            raise ValueError(f"{path}: missing 'value' column; header has {header}")
        if "rank" in header:
            rank_cols = ["rank"]
        else:
            rank_cols = [c for c in header if c.startswith("rank_") and c[5:].isdigit()]
            rank_cols.sort(key=lambda c: int(c[5:]))
        if not rank_cols:
            raise ValueError(f"{path}: no rank columns (expected 'rank' or 'rank_1', ...)")
        values, ranks = [], []
        for lineno, row in enumerate(reader, start=2):
            v = _parse_float(row["value"], lineno, "value")
            if v != int(v) or v < 1:
                raise ValueError(f"row {lineno}: value must be a positive integer, got {v!r}")
            values.append(int(v))
            row_ranks = []
            for c in rank_cols:
                r = _parse_float(row[c], lineno, c)
                if r != int(r) or r < 1:
                    raise ValueError(f"row {lineno}: column {c!r} must be a positive integer, got {r!r}")
                row_ranks.append(int(r))
            ranks.append(row_ranks)
    if not values:
        raise ValueError(f"{path}: no data rows")
    return np.array(values, dtype=np.int64), np.array(ranks, dtype=np.int64)


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def scenario_seed(master_seed: int, index: int) -> int:
    """Deterministic per-scenario seed derived from the config seed."""
    return int(np.random.SeedSequence((int(master_seed), int(index))).generate_state(1, np.uint64)[0])


def _cfg_error(where: str, message: str):
    raise ValueError(f"config {where}: {message}")


def _as_ranker(entry, where: str) -> RankerSpec:
    if entry == "perfect":
        return RankerSpec.perfect()
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return RankerSpec.concomitant(float(entry))
    _cfg_error(where, f"ranker entry must be a number or 'perfect', got {entry!r}")


def _require(block: dict, key: str, where: str):
    if key not in block:
        _cfg_error(where, f"missing required key {key!r}")
    return block[key]


def _methods_of(block: dict, where: str) -> Tuple[str, ...]:
    methods = _require(block, "methods", where)
    if not isinstance(methods, list) or not methods:
        _cfg_error(where, "'methods' must be a non-empty array of method tags")
    bad = [m for m in methods if m not in METHOD_TAGS]
    if bad:
        _cfg_error(where, f"unknown methods {bad}; choose from {METHOD_TAGS}")
    return tuple(methods)


def _conditioning_of(block: dict, where: str) -> str:
    scheme = block.get("conditioning", "all_categories_present")
    if scheme not in CONDITIONING_SCHEMES:
        _cfg_error(where, f"unknown conditioning {scheme!r}; choose from {CONDITIONING_SCHEMES}")
    return scheme


def expand_config(
    cfg: dict,
    master_seed: Optional[int] = None,
    replications: Optional[int] = None,
) -> Tuple[List[Scenario], List[dict]]:
    """Turn a parsed config into scenarios plus a list of skipped grid points.

    Scenario blocks come first, then grid blocks expanded in the nested order
    rho, p3, p2, n, set_size.  Each scenario's seed derives from the master
    seed and its position, so the expansion is reproducible; the optional
    arguments override the config's top-level ``master_seed`` and
    ``replications``.
    """
    if master_seed is None:
        master_seed = cfg.get("master_seed")
    if master_seed is None:
        _cfg_error("top level", "missing required key 'master_seed' (or pass --seed)")
    if replications is None:
        replications = cfg.get("replications")

    scenarios: List[Scenario] = []
    skipped: List[dict] = []
    index = 0

    def next_seed():
        nonlocal index
        seed = scenario_seed(master_seed, index)
        index += 1
        return seed

    def reps_of(block: dict, where: str) -> int:
        r = block.get("replications", replications)
        if r is None:
            _cfg_error(where, "no 'replications' here or at top level")
        if not isinstance(r, int) or r < 1:
            _cfg_error(where, f"'replications' must be a positive integer, got {r!r}")
        return r

    for si, block in enumerate(cfg.get("scenario", [])):
        where = f"[[scenario]] #{si + 1}"
        probs = _require(block, "probs", where)
        try:
            dist = OrdinalDistribution(probs)
        except (ValueError, TypeError) as err:
            _cfg_error(where, f"bad 'probs': {err}")
        rho = _require(block, "rho", where)
        if not isinstance(rho, list) or not rho:
            _cfg_error(where, "'rho' must be a non-empty array, one entry per ranker")
        rankers = tuple(_as_ranker(e, where) for e in rho)
        scenarios.append(
            Scenario(
                n=int(_require(block, "n", where)),
                set_size=int(_require(block, "set_size", where)),
                methods=_methods_of(block, where),
                replications=reps_of(block, where),
                master_seed=block.get("master_seed", next_seed()),
                conditioning=_conditioning_of(block, where),
                dist=dist,
                rankers=rankers,
            )
        )

    for gi, block in enumerate(cfg.get("grid", [])):
        where = f"[[grid]] #{gi + 1}"
        rho_grid = _require(block, "rho", where)
        p3_grid = _require(block, "p3", where)
        p2_grid = _require(block, "p2", where)
        n_grid = _require(block, "n", where)
        h_grid = _require(block, "set_size", where)
        for name, grid in (("rho", rho_grid), ("p3", p3_grid), ("p2", p2_grid),
                           ("n", n_grid), ("set_size", h_grid)):
            if not isinstance(grid, list) or not grid:
                _cfg_error(where, f"{name!r} must be a non-empty array")
        methods = _methods_of(block, where)
        conditioning = _conditioning_of(block, where)
        reps = reps_of(block, where)
        for rho_entry in rho_grid:
            entries = rho_entry if isinstance(rho_entry, list) else [rho_entry]
            rankers = tuple(_as_ranker(e, where) for e in entries)
            for p3 in p3_grid:
                for p2 in p2_grid:
                    p1 = 1.0 - float(p2) - float(p3)
                    if p1 <= 1e-12:
                        skipped.append(
                            {
                                "grid": gi + 1,
                                "rho": rho_entry,
                                "p2": p2,
                                "p3": p3,
                                "reason": f"p1 = {p1:.3f} <= 0 off the probability simplex",
                            }
                        )
                        continue
                    dist = OrdinalDistribution([p1, float(p2), float(p3)])
                    for n in n_grid:
                        for h in h_grid:
                            scenarios.append(
                                Scenario(
                                    n=int(n),
                                    set_size=int(h),
                                    methods=methods,
                                    replications=reps,
                                    master_seed=next_seed(),
                                    conditioning=conditioning,
                                    dist=dist,
                                    rankers=rankers,
                                )
                            )

    if not scenarios:
        _cfg_error("top level", "no [[scenario]] or [[grid]] blocks produced scenarios")
    return scenarios, skipped


def _ranker_cell(spec: RankerSpec) -> str:
    return "perfect" if spec.kind == "perfect" else repr(spec.rho)


def write_simulation_csv(path, results: Sequence[ScenarioResult]) -> None:
    """One row per (scenario, method); header documented in the README.

    Every scenario in one file must share the category count; ranker columns
    pad to the widest scenario.
    """
    if not results:
        raise ValueError("no results to write")
    q_counts = {r.scenario.num_categories for r in results}
    if len(q_counts) != 1:
        raise ValueError(f"scenarios disagree on category count: {sorted(q_counts)}")
    q_count = q_counts.pop()
    for r in results:
        if r.scenario.dist is None:
            raise ValueError("simulation CSV covers distribution scenarios only")
    k_max = max(r.scenario.num_rankers for r in results)
    header = (
        [f"rho_{k + 1}" for k in range(k_max)]
        + [f"p_{q + 1}" for q in range(q_count)]
        + ["n", "H", "conditioning", "method"]
        + [f"mse_{q + 1}" for q in range(q_count)]
        + ["re", "failures", "fail_conditioning", "fail_nonconvergence", "re_se", "flagged"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for res in results:
            sc = res.scenario
            rho_cells = [_ranker_cell(s) for s in sc.rankers]
            rho_cells += [""] * (k_max - len(rho_cells))
            p_cells = [repr(float(p)) for p in sc.dist.probs]
            for method in res.methods:
                nonconv = res.fail_nonconvergence[method]
                writer.writerow(
                    rho_cells
                    + p_cells
                    + [sc.n, sc.set_size, sc.conditioning, method]
                    + [repr(float(v)) for v in res.mse[method]]
                    + [
                        repr(float(res.re[method])),
                        res.fail_conditioning + nonconv,
                        res.fail_conditioning,
                        nonconv,
                        repr(float(res.re_se[method])),
                        int(res.flagged),
                    ]
                )


def write_estimates_csv(path, results: Sequence[EstimateResult], num_categories: int) -> None:
    header = (
        ["method"]
        + [f"c_{q + 1}" for q in range(num_categories - 1)]
        + [f"p_{q + 1}" for q in range(num_categories)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for res in results:
            writer.writerow(
                [res.method]
                + [repr(float(c)) for c in res.cumulative_hat]
                + [repr(float(p)) for p in res.proportions_hat]
            )


def write_bmd_csv(path, rows: Sequence[Tuple[str, ScenarioResult]]) -> None:
    """RE table: one row per (labeled scenario, method)."""
    if not rows:
        raise ValueError("no results to write")
    header = [
        "ranker", "n", "H", "conditioning", "method",
        "re", "re_se", "completed", "fail_conditioning", "fail_nonconvergence", "flagged",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for label, res in rows:
            sc = res.scenario
            for method in res.methods:
                writer.writerow(
                    [
                        label, sc.n, sc.set_size, sc.conditioning, method,
                        repr(float(res.re[method])),
                        repr(float(res.re_se[method])),
                        res.completed,
                        res.fail_conditioning,
                        res.fail_nonconvergence[method],
                        int(res.flagged),
                    ]
                )
