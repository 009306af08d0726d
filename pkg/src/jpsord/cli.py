"""Command-line front end: simulate, estimate, bmd-study, make-surrogate."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Tuple

import numpy as np

from .dataio import (
    expand_config,
    ingest_population,
    load_config,
    make_surrogate_population,
    emit_population,
    population_summary,
    read_sample_csv,
    scenario_seed,
    write_bmd_csv,
    write_estimates_csv,
    write_simulation_csv,
)
from .estimators import (
    estimate_iso_combined,
    estimate_iso_drop_empty,
    estimate_iso_maxmin,
    estimate_iso_minmax,
    estimate_iso_no_empty,
    estimate_ml,
    estimate_srs,
    estimate_standard_jps,
)
from .harness import Scenario, run_grid
from .multiranker import RankerWeights, estimate_sm, estimate_sm_star
from .types import JpsSample, MultiRankerSample

log = logging.getLogger("jpsord")

_ESTIMATE_SINGLE = {
    "srs": None,
    "st": estimate_standard_jps,
    "ml": estimate_ml,
    "iso": estimate_iso_drop_empty,
    "iso_no_empty": estimate_iso_no_empty,
    "iso_minus": estimate_iso_minmax,
    "iso_plus": estimate_iso_maxmin,
    "iso_star": estimate_iso_combined,
}
_ESTIMATE_MULTI = {"sm": estimate_sm, "sm_star": estimate_sm_star}


def _split_methods(text: str) -> List[str]:
    return [m.strip() for m in text.split(",") if m.strip()]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scenarios, skipped = expand_config(cfg, master_seed=args.seed, replications=args.replications)
    for point in skipped:
        log.info("skipped grid point %s", point)
    out = args.out or cfg.get("out")
    if out is None:
        print("error: no output path; pass --out or set 'out' in the config", file=sys.stderr)
        return 1
    results = run_grid(scenarios, workers=args.workers)
    write_simulation_csv(out, results)
    flagged = [r for r in results if r.flagged]
    print(
        f"wrote {out}: {len(results)} scenarios, {len(skipped)} grid points skipped, "
        f"{len(flagged)} flagged"
    )
    if flagged and not args.allow_flagged:
        for r in flagged:
            sc = r.scenario
            print(
                f"flagged unreliable: n={sc.n} H={sc.set_size} {sc.conditioning} "
                f"({r.fail_conditioning}/{sc.replications} conditioning failures)",
                file=sys.stderr,
            )
        return 2
    return 0


def _build_sample(values, ranks, set_size: Optional[int], num_categories: Optional[int]):
    if set_size is None:
        set_size = int(ranks.max())
        log.warning("no --set-size given; inferred H=%d from the largest rank", set_size)
    if ranks.max() > set_size:
        raise ValueError(f"rank {int(ranks.max())} exceeds declared set size {set_size}")
    if num_categories is None:
        num_categories = int(values.max())
    if values.max() > num_categories:
        raise ValueError(
            f"category {int(values.max())} exceeds declared num_categories {num_categories}"
        )
    if ranks.shape[1] == 1:
        return JpsSample(values, ranks[:, 0], set_size, num_categories)
    return MultiRankerSample(values, ranks, set_size, num_categories)


def cmd_estimate(args) -> int:
    values, ranks = read_sample_csv(args.data)
    sample = _build_sample(values, ranks, args.set_size, args.num_categories)
    multi = isinstance(sample, MultiRankerSample)

    if args.methods:
        methods = _split_methods(args.methods)
    else:
        methods = ["srs", "st", "iso", "ml"] if not multi else ["srs", "sm", "sm_star"]
    known = set(_ESTIMATE_SINGLE) | set(_ESTIMATE_MULTI)
    unknown = [m for m in methods if m not in known]
    if unknown:
        print(f"error: unknown methods {unknown}; choose from {sorted(known)}", file=sys.stderr)
        return 1

    weights = None
    if args.deltas:
        deltas = np.array([float(d) for d in args.deltas.split(",")])
        weights = RankerWeights(deltas / deltas.sum(), np.full(deltas.size, np.nan))
        if multi and deltas.size != sample.num_rankers:
            print(
                f"error: {deltas.size} deltas for {sample.num_rankers} rank columns",
                file=sys.stderr,
            )
            return 1

    results = []
    for method in methods:
        try:
            if method == "srs":
                res = estimate_srs(sample.values, sample.num_categories)
            elif method in _ESTIMATE_MULTI:
                if not multi:
                    raise ValueError(f"method {method!r} needs rank_1..rank_K columns")
                if weights is None:
                    raise ValueError(
                        f"method {method!r} needs --deltas (sample files carry no ranker scores)"
                    )
                res = _ESTIMATE_MULTI[method](sample, weights)
            else:
                if multi:
                    raise ValueError(f"method {method!r} is single-ranker; file has several")
                res = _ESTIMATE_SINGLE[method](sample)
        except ValueError as err:
            print(f"error: method {method!r}: {err}", file=sys.stderr)
            return 1
        results.append(res)

    for res in results:
        cells = ", ".join(f"p_{q + 1}={p:.4f}" for q, p in enumerate(res.proportions_hat))
        print(f"{res.method}: {cells}")
    if args.out:
        write_estimates_csv(args.out, results, sample.num_categories)
        print(f"wrote {args.out}")
    return 0


def _bmd_scenarios(pop, n, set_size, replications, master_seed, columns) -> List[Tuple[str, Scenario]]:
    labeled = []
    index = 0

    def build(label, cols, conditioning, methods):
        nonlocal index
        sc = Scenario(
            n=n,
            set_size=set_size,
            methods=methods,
            replications=replications,
            master_seed=scenario_seed(master_seed, index),
            conditioning=conditioning,
            population=pop,
            ranker_columns=cols,
        )
        index += 1
        labeled.append((label, sc))

    for k in columns:
        label = f"z{k + 1}"
        build(label, (k,), "no_empty_strata", ("st", "iso", "ml"))
        build(
            label,
            (k,),
            "at_least_one_empty_stratum",
            ("st", "iso", "iso_minus", "iso_plus", "iso_star", "ml"),
        )
    if len(columns) > 1:
        label = "+".join(f"z{k + 1}" for k in columns)
        build(label, tuple(columns), "all_categories_present", ("sm", "sm_star", "reg"))
    return labeled


def cmd_bmd_study(args) -> int:
    if args.surrogate:
        pop = make_surrogate_population(args.seed)
        print("using the synthetic surrogate population (no real measurements)")
    elif args.population:
        pop = ingest_population(args.population)
    else:
        print("error: pass --population FILE or --surrogate", file=sys.stderr)
        return 1

    summary = population_summary(pop)
    print(
        f"population: {summary['rows']} rows, proportions "
        f"{np.round(summary['proportions'], 4).tolist()}, ranker correlations "
        f"{np.round(summary['correlations'], 4).tolist()}"
    )

    if args.rankers:
        columns = [int(c) - 1 for c in args.rankers.split(",")]
    else:
        columns = list(range(pop.num_rankers))
    bad = [c + 1 for c in columns if c < 0 or c >= pop.num_rankers]
    if bad:
        print(f"error: ranker columns {bad} out of range 1..{pop.num_rankers}", file=sys.stderr)
        return 1

    labeled = _bmd_scenarios(pop, args.n, args.set_size, args.replications, args.seed, columns)
    results = run_grid([sc for _, sc in labeled], workers=args.workers)
    rows = list(zip([label for label, _ in labeled], results))
    write_bmd_csv(args.out, rows)
    flagged = [r for r in results if r.flagged]
    print(f"wrote {args.out}: {len(rows)} scenario tables, {len(flagged)} flagged")
    if flagged and not args.allow_flagged:
        for r in flagged:
            print(
                f"flagged unreliable: {r.scenario.conditioning} "
                f"({r.fail_conditioning}/{r.scenario.replications} conditioning failures)",
                file=sys.stderr,
            )
        return 2
    return 0


def cmd_make_surrogate(args) -> int:
    pop = make_surrogate_population(args.seed, rows=args.rows)
    emit_population(pop, args.out)
    summary = population_summary(pop)
    print(
        f"wrote {args.out}: {summary['rows']} synthetic rows, proportions "
        f"{np.round(summary['proportions'], 4).tolist()}, correlations "
        f"{np.round(summary['correlations'], 4).tolist()}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jpsord",
        description="Estimation of ordered-category populations from rank-augmented samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation config and write a results CSV")
    sim.add_argument("--config", required=True, help="TOML config with scenario/grid blocks")
    sim.add_argument("--seed", type=int, default=None, help="override the config master seed")
    sim.add_argument("--out", default=None, help="output CSV path (overrides config 'out')")
    sim.add_argument("--replications", type=int, default=None, help="override replication count")
    sim.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sim.add_argument("--allow-flagged", action="store_true",
                     help="exit 0 even when a scenario is flagged unreliable")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="run estimators on a sample CSV")
    est.add_argument("--data", required=True, help="CSV with value and rank columns")
    est.add_argument("--methods", default=None, help="comma-separated method tags")
    est.add_argument("--set-size", type=int, default=None,
                     help="comparison set size H (inferred from ranks when omitted)")
    est.add_argument("--num-categories", type=int, default=None,
                     help="category count Q (inferred from values when omitted)")
    est.add_argument("--deltas", default=None,
                     help="comma-separated ranker weights for sm/sm_star (normalized)")
    est.add_argument("--out", default=None, help="write estimates CSV here")
    est.set_defaults(func=cmd_estimate)

    bmd = sub.add_parser("bmd-study", help="bootstrap RE study on a finite population")
    bmd.add_argument("--population", default=None, help="population CSV (id, outcome, z1..zK)")
    bmd.add_argument("--surrogate", action="store_true",
                     help="use the synthetic surrogate population instead of a file")
    bmd.add_argument("--n", type=int, required=True, help="sample size per replication")
    bmd.add_argument("--set-size", type=int, required=True, help="comparison set size H")
    bmd.add_argument("--replications", type=int, required=True, help="bootstrap replications")
    bmd.add_argument("--seed", type=int, required=True, help="master seed")
    bmd.add_argument("--rankers", default=None,
                     help="comma-separated 1-based ranking column numbers (default: all)")
    bmd.add_argument("--out", required=True, help="output CSV path")
    bmd.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    bmd.add_argument("--allow-flagged", action="store_true",
                     help="exit 0 even when a scenario is flagged unreliable")
    bmd.set_defaults(func=cmd_bmd_study)

    mk = sub.add_parser("make-surrogate", help="write the synthetic surrogate population CSV")
    mk.add_argument("--out", required=True, help="output CSV path")
    mk.add_argument("--seed", type=int, required=True, help="generator seed")
    mk.add_argument("--rows", type=int, default=234, help="population size")
    mk.set_defaults(func=cmd_make_surrogate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
