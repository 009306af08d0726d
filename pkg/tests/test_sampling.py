"""Sampling-layer checks.

The rank-distribution oracle at the top enumerates every comparison-set
outcome in exact arithmetic (ties contribute uniformly over their window),
and the naive whole-sample rejection sampler re-implements the
empty-strata conditioning law directly so the production unit-level
rejection can be checked against it distributionally.
"""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from jpsord.sampling import (
    BootstrapJpsSampler,
    ConditioningExhausted,
    FreshUnitPool,
    InfiniteJpsSampler,
    PopulationPool,
    RankerSpec,
    bootstrap_population,
    condition_sample,
    draw_jps,
    draw_jps_multi,
    draw_srs,
    gen_concomitant,
)
from jpsord.types import FinitePopulation, OrdinalDistribution


def rank_given_value_exact(probs, set_size, value):
    """P(R = r | X = value) under perfect ranking with uniform tie-breaks."""
    q_count = len(probs)
    probs = [Fraction(p) for p in probs]
    out = [Fraction(0)] * set_size
    for comps in itertools.product(range(1, q_count + 1), repeat=set_size - 1):
        weight = Fraction(1)
        for c in comps:
            weight *= probs[c - 1]
        below = sum(1 for c in comps if c < value)
        ties = 1 + sum(1 for c in comps if c == value)
        for r in range(below + 1, below + ties + 1):
            out[r - 1] += weight / ties
    return out


def naive_conditioned_empty(sampler, seed, n):
    """Whole-sample rejection under the design-acceptance empty-strata law."""
    rng = np.random.default_rng(seed)
    H, Q = sampler.set_size, sampler.num_categories
    while True:
        bits = int(rng.integers(1, 2**H - 1))
        design = np.array([(bits >> h) & 1 == 1 for h in range(H)], dtype=bool)
        if rng.random() < 1.0 / design.sum():
            break
    while True:
        values, ranks, scores = sampler.draw_units(n, rng)
        realized = np.bincount(ranks[:, 0], minlength=H + 1)[1:] == 0
        if np.array_equal(realized, design):
            if np.bincount(values, minlength=Q + 1)[1:].min() > 0:
                return sampler.bundle(values, ranks, scores)


HALF = OrdinalDistribution([0.5, 0.5])
SKEW = OrdinalDistribution([0.3, 0.4, 0.3])


# ----------------------------------------------------------------- draw_srs


def test_srs_degenerate_distribution():
    np.testing.assert_array_equal(
        draw_srs(OrdinalDistribution([1.0]), 5, 1), [1, 1, 1, 1, 1]
    )


def test_srs_law_of_large_numbers():
    values = draw_srs(HALF, 100_000, 7)
    assert abs(np.mean(values == 1) - 0.5) < 0.01


def test_srs_deterministic():
    np.testing.assert_array_equal(draw_srs(SKEW, 50, 123), draw_srs(SKEW, 50, 123))
    assert not np.array_equal(draw_srs(SKEW, 50, 123), draw_srs(SKEW, 50, 124))


# ----------------------------------------------------------- gen_concomitant


def test_concomitant_rho_one_is_standardized_index():
    x = np.array([1.0, 2.0, 3.0, 2.0])
    z = gen_concomitant(x, SKEW, 1.0, np.random.default_rng(0))
    want = (x - SKEW.category_mean()) / SKEW.category_sd()
    np.testing.assert_array_equal(z, want)


def test_concomitant_rho_zero_ignores_x():
    a = gen_concomitant(np.zeros(100), SKEW, 0.0, np.random.default_rng(5))
    b = gen_concomitant(np.full(100, 3.0), SKEW, 0.0, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_concomitant_correlation_target():
    rng = np.random.default_rng(9)
    x = draw_srs(SKEW, 100_000, 10).astype(float)
    z = gen_concomitant(x, SKEW, 0.9, rng)
    assert abs(np.corrcoef(x, z)[0, 1] - 0.9) < 0.02


def test_concomitant_rejects_zero_variance():
    with pytest.raises(ValueError):
        gen_concomitant(np.ones(3), OrdinalDistribution([1.0]), 0.5, 1)


# ------------------------------------------------------------------ draw_jps


def test_jps_set_size_one_all_ranks_one():
    s = draw_jps(SKEW, 20, 1, RankerSpec.perfect(), 3)
    np.testing.assert_array_equal(s.ranks, np.ones(20, dtype=int))


def test_jps_rank_given_value_matches_exact_enumeration():
    # frozen from rank_given_value_exact((0.5, 0.5), 3, 1): (7/12, 1/3, 1/12)
    want = rank_given_value_exact((0.5, 0.5), 3, 1)
    assert want == [Fraction(7, 12), Fraction(1, 3), Fraction(1, 12)]
    s = draw_jps(HALF, 100_000, 3, RankerSpec.perfect(), 11)
    sel = s.values == 1
    freqs = np.bincount(s.ranks[sel], minlength=4)[1:] / sel.sum()
    np.testing.assert_allclose(freqs, [float(w) for w in want], atol=0.015)
    assert freqs[0] > freqs[2]


def test_jps_rank_marginal_uniform():
    s = draw_jps(SKEW, 100_000, 4, RankerSpec.concomitant(0.9), 13)
    freqs = np.bincount(s.ranks, minlength=5)[1:] / s.values.size
    np.testing.assert_allclose(freqs, 0.25, atol=0.01)


def test_jps_values_marginally_parent():
    s = draw_jps(SKEW, 50_000, 3, RankerSpec.concomitant(0.7), 17)
    counts = np.bincount(s.values, minlength=4)[1:]
    p = stats.chisquare(counts, f_exp=s.values.size * SKEW.probs).pvalue
    assert p > 1e-4


def test_jps_deterministic():
    a = draw_jps(SKEW, 40, 3, RankerSpec.concomitant(0.8), 99)
    b = draw_jps(SKEW, 40, 3, RankerSpec.concomitant(0.8), 99)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.ranks, b.ranks)


# ------------------------------------------------------------ draw_jps_multi


def test_multi_single_ranker_reduces_to_draw_jps():
    ranker = RankerSpec.concomitant(0.9)
    a = draw_jps(SKEW, 30, 3, ranker, 21)
    b = draw_jps_multi(SKEW, 30, 3, [ranker], 21)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.ranks, b.ranks[:, 0])


def test_multi_agreement_increases_with_shared_signal():
    strong = draw_jps_multi(
        SKEW, 3000, 3, [RankerSpec.concomitant(0.9), RankerSpec.concomitant(0.9)], 31
    )
    weak = draw_jps_multi(
        SKEW, 3000, 3, [RankerSpec.concomitant(0.9), RankerSpec.concomitant(0.0)], 31
    )
    agree = lambda s: np.mean(s.ranks[:, 0] == s.ranks[:, 1])
    assert agree(strong) > agree(weak) + 0.05


def test_multi_rank_marginals_uniform_per_ranker():
    s = draw_jps_multi(
        SKEW, 60_000, 3, [RankerSpec.concomitant(0.9), RankerSpec.concomitant(0.5)], 37
    )
    for k in range(2):
        freqs = np.bincount(s.ranks[:, k], minlength=4)[1:] / s.values.size
        np.testing.assert_allclose(freqs, 1 / 3, atol=0.01)


def test_multi_scores_are_measured_units_ranking_values():
    s = draw_jps_multi(SKEW, 25, 3, [RankerSpec.perfect(), RankerSpec.perfect()], 41)
    np.testing.assert_array_equal(s.scores[:, 0], s.values.astype(float))


# ------------------------------------------------------------ conditioning


def sampler_for(dist, set_size, rho=0.9):
    return InfiniteJpsSampler(dist, set_size, [RankerSpec.concomitant(rho)])


def test_conditioning_postconditions():
    base = sampler_for(SKEW, 3)
    s = condition_sample(base, "all_categories_present", 1, n=12)
    assert set(np.unique(s.values)) == {1, 2, 3}

    s = condition_sample(base, "no_empty_strata", 2, n=12)
    assert set(np.unique(s.values)) == {1, 2, 3}
    assert set(np.unique(s.ranks)) == {1, 2, 3}

    s = condition_sample(base, "at_least_one_empty_stratum", 3, n=12)
    assert set(np.unique(s.values)) == {1, 2, 3}
    assert len(set(np.unique(s.ranks))) < 3


def test_conditioning_validation_errors():
    base = sampler_for(SKEW, 3)
    with pytest.raises(ValueError):
        condition_sample(base, "sometimes", 1, n=10)
    with pytest.raises(ValueError):
        condition_sample(base, "no_empty_strata", 1, n=2)
    with pytest.raises(ValueError):
        condition_sample(sampler_for(SKEW, 1), "at_least_one_empty_stratum", 1, n=10)
    multi = InfiniteJpsSampler(SKEW, 3, [RankerSpec.perfect(), RankerSpec.perfect()])
    with pytest.raises(ValueError):
        condition_sample(multi, "no_empty_strata", 1, n=10)


def test_conditioning_exhaustion_is_reported():
    # one attempt cannot hit the empty-design match at this size
    base = sampler_for(SKEW, 3)
    with pytest.raises(ConditioningExhausted):
        for seed in range(5):
            condition_sample(
                base, "at_least_one_empty_stratum", seed, n=30, max_attempts=1
            )


def test_conditioning_deterministic():
    base = sampler_for(SKEW, 3)
    a = condition_sample(base, "no_empty_strata", 77, n=15)
    b = condition_sample(base, "no_empty_strata", 77, n=15)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.ranks, b.ranks)


def test_empty_design_split_even_for_two_strata():
    # both singleton designs are accepted with probability 1, so realized
    # designs should split about evenly
    base = InfiniteJpsSampler(HALF, 2, [RankerSpec.perfect()])
    empty_first = 0
    draws = 4000
    for i in range(draws):
        s = condition_sample(base, "at_least_one_empty_stratum", (50, i), n=5)
        if not np.any(s.ranks == 1):
            empty_first += 1
    assert abs(empty_first / draws - 0.5) < 0.025


def test_unit_level_rejection_matches_naive_whole_sample_law():
    # compare the production sampler against the naive reference on the
    # joint distribution of (realized design, count of category-1 values)
    base = InfiniteJpsSampler(HALF, 2, [RankerSpec.perfect()])
    n, draws = 5, 4000

    def key(sample):
        empty_first = not np.any(sample.ranks == 1)
        return (empty_first, int(np.sum(sample.values == 1)))

    fast = np.zeros((2, n + 1))
    slow = np.zeros((2, n + 1))
    for i in range(draws):
        kf = key(condition_sample(base, "at_least_one_empty_stratum", (60, i), n=n))
        ks = key(naive_conditioned_empty(base, (61, i), n))
        fast[int(kf[0]), kf[1]] += 1
        slow[int(ks[0]), ks[1]] += 1
    np.testing.assert_allclose(fast / draws, slow / draws, atol=0.04)


# ------------------------------------------------------------- bootstrap


def small_population():
    x = np.array([1, 1, 2, 2, 2, 3, 3])
    z = np.column_stack([x + 0.1, -x.astype(float)])
    return FinitePopulation(x=x, z=z, num_categories=3)


def test_bootstrap_single_row_population():
    pop = FinitePopulation(x=np.array([2]), z=np.array([[0.4]]), num_categories=3)
    s = bootstrap_population(pop, 3000, 3, [0], seed=5)
    assert np.all(s.values == 2)
    freqs = np.bincount(s.ranks, minlength=4)[1:] / 3000
    np.testing.assert_allclose(freqs, 1 / 3, atol=0.03)


def test_bootstrap_ranker_equal_to_outcome_keeps_uniform_ranks():
    pop = small_population()
    pop = FinitePopulation(
        x=pop.x, z=np.column_stack([pop.x.astype(float)]), num_categories=3
    )
    s = bootstrap_population(pop, 30_000, 3, [0], seed=6)
    freqs = np.bincount(s.ranks, minlength=4)[1:] / 30_000
    np.testing.assert_allclose(freqs, 1 / 3, atol=0.01)


def test_bootstrap_srs_recovers_population_proportions():
    from jpsord.dataio import make_surrogate_population
    from jpsord.estimators import estimate_srs

    pop = make_surrogate_population(seed=42)
    s = bootstrap_population(pop, 100_000, 1, [0], seed=7)
    est = estimate_srs(s.values, pop.num_categories)
    np.testing.assert_allclose(est.proportions_hat, pop.proportions(), atol=0.01)


def test_bootstrap_multi_column_selection():
    pop = small_population()
    s = bootstrap_population(pop, 40, 3, [1, 0], seed=8)
    assert s.ranks.shape == (40, 2)
    assert s.scores.shape == (40, 2)
    with pytest.raises(ValueError):
        bootstrap_population(pop, 10, 3, [2], seed=9)


# ------------------------------------------------------------- fresh pools


def test_fresh_unit_pool_shapes_and_determinism():
    pool = FreshUnitPool(SKEW, (RankerSpec.concomitant(0.9), RankerSpec.perfect()))
    a = pool.draw_z(7, np.random.default_rng(3))
    b = pool.draw_z(7, np.random.default_rng(3))
    assert a.shape == (7, 2)
    np.testing.assert_array_equal(a, b)


def test_population_pool_draws_selected_columns():
    pop = small_population()
    pool = PopulationPool(pop, (1,))
    z = pool.draw_z(500, np.random.default_rng(4))
    assert z.shape == (500, 1)
    assert set(np.unique(z)).issubset(set(np.unique(pop.z[:, 1])))
