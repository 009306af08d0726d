"""Estimator checks.

Oracles defined here, used below and by the acceptance tests:

* ``window_minmax`` / ``window_maxmin`` evaluate the explicit min-max /
  max-min window formulas over occupied strata by brute-force enumeration
  (interior zero-weight strata inherit the formula value of their left /
  right neighbour; a boundary stratum with no neighbour on the required
  side copies the nearest occupied value from the other side).
* ``grid_monotone_fit`` solves the weighted least-squares non-increasing
  fit by dynamic programming over a fixed value grid, so it is accurate to
  the grid resolution and shares no code with the production PAVA.
"""

import math

import numpy as np
import pytest
from scipy import optimize

from jpsord.estimators import (
    MlOptions,
    estimate_iso_combined,
    estimate_iso_drop_empty,
    estimate_iso_maxmin,
    estimate_iso_minmax,
    estimate_iso_no_empty,
    estimate_ml,
    estimate_srs,
    estimate_standard_jps,
    isotonize_with_imputation,
    log_likelihood,
    tabulate,
)
from jpsord.kernels import order_stat_category_pmf
from jpsord.sampling import RankerSpec, draw_jps
from jpsord.types import OrdinalDistribution

from conftest import make_jps


def _windowed(values, weights, r, outer, inner):
    occupied = [i for i in range(len(values)) if weights[i] > 0]

    def av(a, b):
        idx = [o for o in occupied if a <= o <= b]
        wsum = sum(weights[o] for o in idx)
        return sum(weights[o] * values[o] for o in idx) / wsum

    if outer == "min":  # min over left starts of max over right ends
        lefts = [h for h in occupied if h <= r]
        if not lefts:
            r = occupied[0]
            lefts = [occupied[0]]
        return min(
            max(av(h, s) for s in occupied if s >= h) for h in lefts
        )
    rights = [s for s in occupied if s >= r]
    if not rights:
        r = occupied[-1]
        rights = [occupied[-1]]
    return max(
        min(av(h, s) for h in occupied if h <= s) for s in rights
    )


def window_minmax(values, weights):
    return np.array([_windowed(values, weights, r, "min", "max") for r in range(len(values))])


def window_maxmin(values, weights):
    return np.array([_windowed(values, weights, r, "max", "min") for r in range(len(values))])


def grid_monotone_fit(values, weights, step=1e-3):
    grid = np.arange(0.0, 1.0 + step / 2, step)
    size = len(values)
    suffix = np.zeros(grid.size)
    arg = np.zeros((size, grid.size), dtype=int)
    for i in reversed(range(size)):
        cost = weights[i] * (values[i] - grid) ** 2
        if i == size - 1:
            total = cost
            arg[i] = np.arange(grid.size)
        else:
            # the next stratum's value must not exceed this one's
            run_best = np.minimum.accumulate(suffix)
            run_arg = np.zeros(grid.size, dtype=int)
            best = 0
            for j in range(1, grid.size):
                if suffix[j] < suffix[best]:
                    best = j
                run_arg[j] = best
            total = cost + run_best
            arg[i] = run_arg
        suffix = total
    out = np.empty(size)
    j = int(np.argmin(suffix))
    out[0] = grid[j]
    for i in range(1, size):
        j = arg[i - 1][j]
        out[i] = grid[j]
    return out


def in_stratum_values(sample):
    counts = tabulate(sample)
    sizes = counts.stratum_sizes.astype(float)
    vals = np.zeros((sample.set_size, sample.num_categories - 1))
    occ = sizes > 0
    vals[occ] = counts.cumulative_counts[occ, :-1] / sizes[occ, None]
    return vals, sizes


def random_jps(rng, n=None, set_size=None, q_count=None):
    set_size = set_size or int(rng.integers(1, 6))
    q_count = q_count or int(rng.integers(2, 5))
    n = n or int(rng.integers(set_size, 4 * set_size + 4))
    values = rng.integers(1, q_count + 1, size=n)
    ranks = rng.integers(1, set_size + 1, size=n)
    return make_jps(values, ranks, set_size=set_size, num_categories=q_count)


SKEW = OrdinalDistribution([0.3, 0.4, 0.3])


# --------------------------------------------------------------------- srs


def test_srs_worked_example():
    r = estimate_srs([1, 2, 3, 3], 3)
    np.testing.assert_allclose(r.proportions_hat, [0.25, 0.25, 0.5])
    np.testing.assert_allclose(r.cumulative_hat, [0.25, 0.5])


def test_srs_single_category_support():
    r = estimate_srs([1, 1, 1], 2)
    np.testing.assert_array_equal(r.cumulative_hat, [1.0])
    np.testing.assert_array_equal(r.proportions_hat, [1.0, 0.0])


def test_srs_matches_naive_recount(rng):
    for _ in range(25):
        q_count = int(rng.integers(2, 6))
        values = rng.integers(1, q_count + 1, size=int(rng.integers(1, 40)))
        want = [np.mean(values <= q) for q in range(1, q_count)]
        r = estimate_srs(values, q_count)
        np.testing.assert_array_equal(r.cumulative_hat, want)


def test_srs_rejects_out_of_range():
    with pytest.raises(ValueError):
        estimate_srs([1, 4], 3)
    with pytest.raises(ValueError):
        estimate_srs([], 3)


# ---------------------------------------------------------------- tabulate


def test_tabulate_worked_example():
    s = make_jps([1, 2], [1, 2], set_size=2, num_categories=2)
    c = tabulate(s)
    np.testing.assert_array_equal(c.stratum_sizes, [1, 1])
    assert c.cumulative_counts[0, 0] == 1  # rank 1, value <= 1
    assert c.cumulative_counts[1, 0] == 0


def test_tabulate_single_stratum_carries_everything():
    s = make_jps([1, 2, 2], [1, 1, 1], set_size=3, num_categories=2)
    c = tabulate(s)
    np.testing.assert_array_equal(c.stratum_sizes, [3, 0, 0])
    np.testing.assert_array_equal(c.cumulative_counts[0], [1, 3])


def test_tabulate_matches_double_loop(rng):
    for _ in range(20):
        s = random_jps(rng)
        c = tabulate(s)
        want = np.zeros((s.set_size, s.num_categories), dtype=int)
        for h in range(1, s.set_size + 1):
            for q in range(1, s.num_categories + 1):
                want[h - 1, q - 1] = int(
                    np.sum((s.ranks == h) & (s.values <= q))
                )
        np.testing.assert_array_equal(c.cumulative_counts, want)


# ------------------------------------------------------------ standard jps


def test_standard_jps_single_stratum_equals_srs():
    values = [1, 3, 2, 2, 1]
    s = make_jps(values, [1] * 5, set_size=1, num_categories=3)
    np.testing.assert_array_equal(
        estimate_standard_jps(s).cumulative_hat, estimate_srs(values, 3).cumulative_hat
    )


def test_standard_jps_excludes_empty_strata():
    s = make_jps([2], [1], set_size=2, num_categories=2)
    r = estimate_standard_jps(s)
    np.testing.assert_array_equal(r.cumulative_hat, [0.0])


def test_standard_jps_two_stratum_hand_trace():
    # stratum 1: values (1, 1, 2) -> 2/3 at or below 1; stratum 2: (1, 2) -> 1/2
    s = make_jps([1, 1, 2, 1, 2], [1, 1, 1, 2, 2], set_size=2, num_categories=2)
    r = estimate_standard_jps(s)
    assert r.cumulative_hat[0] == pytest.approx((2 / 3 + 1 / 2) / 2)


def test_standard_jps_permutation_invariant(rng):
    s = random_jps(rng, n=20, set_size=3, q_count=3)
    perm = rng.permutation(20)
    t = make_jps(s.values[perm], s.ranks[perm], set_size=3, num_categories=3)
    np.testing.assert_array_equal(
        estimate_standard_jps(s).cumulative_hat, estimate_standard_jps(t).cumulative_hat
    )


# ------------------------------------------------------------ log-likelihood


def test_loglik_single_stratum_is_multinomial():
    values = [1, 1, 2, 3, 3, 3]
    s = make_jps(values, [1] * 6, set_size=1, num_categories=3)
    c = np.array([0.2, 0.7])
    p = np.diff(c, prepend=0.0, append=1.0)
    counts = np.bincount(values, minlength=4)[1:]
    want = float(np.dot(counts, np.log(p)))
    assert log_likelihood(s, c) == pytest.approx(want, abs=1e-12)


def test_loglik_single_observation_closed_form():
    # rank 1 of a pair: P(value 1) = 2c - c^2, c = 0.5 -> 0.75
    s = make_jps([1], [1], set_size=2, num_categories=2)
    assert log_likelihood(s, [0.5]) == pytest.approx(math.log(0.75), abs=1e-14)
    assert log_likelihood(s, [0.3]) == pytest.approx(
        math.log(2 * 0.3 - 0.3**2), abs=1e-14
    )


def test_loglik_matches_per_observation_sum(rng):
    for _ in range(20):
        s = random_jps(rng)
        q_count = s.num_categories
        c_interior = np.sort(rng.uniform(0.05, 0.95, size=q_count - 1))
        while np.any(np.diff(c_interior) <= 1e-3):
            c_interior = np.sort(rng.uniform(0.05, 0.95, size=q_count - 1))
        cum = np.append(c_interior, 1.0)
        want = 0.0
        for x, r in zip(s.values, s.ranks):
            pmf = order_stat_category_pmf(int(r), s.set_size, cum)
            want += math.log(pmf[x - 1])
        assert log_likelihood(s, c_interior) == pytest.approx(want, abs=1e-9)


def test_loglik_underflow_returns_neg_inf():
    s = make_jps([1], [2], set_size=2, num_categories=3)
    assert log_likelihood(s, np.array([1e-300, 2e-300])) == -np.inf


def test_loglik_validates_cutoffs():
    s = make_jps([1, 2], [1, 2], set_size=2, num_categories=2)
    with pytest.raises(ValueError):
        log_likelihood(s, [0.2, 0.4])
    with pytest.raises(ValueError):
        log_likelihood(s, [1.2])
    s3 = make_jps([1, 3], [1, 2], set_size=2, num_categories=3)
    with pytest.raises(ValueError):
        log_likelihood(s3, [0.6, 0.4])


# -------------------------------------------------------------------- ml


def test_ml_single_stratum_matches_srs():
    values = draw_srs_like = draw_jps(SKEW, 500, 1, RankerSpec.perfect(), 2)
    srs = estimate_srs(draw_srs_like.values, 3)
    ml = estimate_ml(draw_srs_like)
    np.testing.assert_allclose(ml.cumulative_hat, srs.cumulative_hat, atol=1e-4)
    assert ml.diagnostics["converged"]


def test_ml_ascent_and_determinism(rng):
    for _ in range(15):
        s = random_jps(rng, n=25, set_size=3, q_count=3)
        a = estimate_ml(s)
        b = estimate_ml(s)
        assert a.diagnostics["loglik"] >= a.diagnostics["loglik_start"] - 1e-12
        np.testing.assert_array_equal(a.cumulative_hat, b.cumulative_hat)


def test_ml_matches_nelder_mead():
    opts = MlOptions()
    rng = np.random.default_rng(8)
    for seed in range(4):
        s = draw_jps(SKEW, 40, 3, RankerSpec.concomitant(0.9), seed)
        mine = estimate_ml(s)

        def neg_ll(c):
            c = np.sort(np.clip(c, opts.bound_lo, opts.bound_hi))
            if np.any(np.diff(c) < 1e-9):
                return 1e9
            return -log_likelihood(s, c)

        ref = optimize.minimize(
            neg_ll,
            x0=mine.cumulative_hat + rng.uniform(-0.02, 0.02, size=2),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000},
        )
        assert mine.diagnostics["loglik"] >= -ref.fun - 1e-6


def test_ml_respects_bounds():
    # every measured unit in the top category pushes the cutoffs to the floor
    s = make_jps([3] * 12, [1, 2, 3] * 4, set_size=3, num_categories=3)
    r = estimate_ml(s)
    assert r.cumulative_hat[0] >= 0.01 - 1e-12
    assert r.cumulative_hat[1] <= 0.99 + 1e-12


def test_ml_options_validation():
    with pytest.raises(ValueError):
        MlOptions(bound_lo=0.5, bound_hi=0.4)
    with pytest.raises(ValueError):
        MlOptions(tolerance=0.0)


# ------------------------------------------------------------- iso family


def test_iso_no_empty_identity_on_monotone():
    # in-stratum fractions (1.0, 0.5) are already non-increasing
    s = make_jps([1, 1, 1, 2], [1, 1, 2, 2], set_size=2, num_categories=2)
    np.testing.assert_allclose(
        estimate_iso_no_empty(s).cumulative_hat,
        estimate_standard_jps(s).cumulative_hat,
    )


def test_iso_no_empty_pools_violation():
    # fractions (0.5, 1.0) with sizes (2, 1) pool to 2/3
    s = make_jps([1, 2, 1], [1, 1, 2], set_size=2, num_categories=2)
    r = estimate_iso_no_empty(s)
    assert r.cumulative_hat[0] == pytest.approx(2 / 3, abs=1e-12)


def test_iso_no_empty_rejects_empty_stratum():
    s = make_jps([1, 2], [1, 1], set_size=2, num_categories=2)
    with pytest.raises(ValueError):
        estimate_iso_no_empty(s)


def test_iso_drop_empty_reductions():
    full = make_jps([1, 2, 1], [1, 1, 2], set_size=2, num_categories=2)
    np.testing.assert_array_equal(
        estimate_iso_drop_empty(full).cumulative_hat,
        estimate_iso_no_empty(full).cumulative_hat,
    )
    single = make_jps([1, 2, 2], [2, 2, 2], set_size=3, num_categories=2)
    r = estimate_iso_drop_empty(single)
    assert r.cumulative_hat[0] == pytest.approx(1 / 3)


def test_iso_drop_empty_middle_stratum_hand_trace():
    # strata sizes (2, 0, 1); fractions (0.5, -, 1.0) pool over {1, 3} to 2/3
    s = make_jps([1, 2, 1], [1, 1, 3], set_size=3, num_categories=2)
    assert estimate_iso_drop_empty(s).cumulative_hat[0] == pytest.approx(2 / 3)


def make_imputation_sample():
    # sizes (5, 0, 5); fractions at or below category 1: (0.6, -, 0.2)
    values = [1, 1, 1, 2, 2] + [1, 2, 2, 2, 2]
    ranks = [1] * 5 + [3] * 5
    return make_jps(values, ranks, set_size=3, num_categories=2)


def test_imputation_family_hand_traces():
    s = make_imputation_sample()
    assert estimate_iso_minmax(s).cumulative_hat[0] == pytest.approx(1.4 / 3)
    assert estimate_iso_maxmin(s).cumulative_hat[0] == pytest.approx(1.0 / 3)
    assert estimate_iso_combined(s).cumulative_hat[0] == pytest.approx(0.4)


def test_imputation_family_agrees_without_empties():
    s = make_jps([1, 2, 1, 2], [1, 1, 2, 2], set_size=2, num_categories=2)
    want = estimate_iso_no_empty(s).cumulative_hat
    for est in (estimate_iso_minmax, estimate_iso_maxmin, estimate_iso_combined):
        np.testing.assert_allclose(est(s).cumulative_hat, want, atol=1e-14)


def test_imputation_boundary_copies_other_side():
    # leading empty stratum: sizes (0, 3)
    s = make_jps([1, 1, 2], [2, 2, 2], set_size=2, num_categories=2)
    want = 2 / 3
    assert estimate_iso_minmax(s).cumulative_hat[0] == pytest.approx(want)
    assert estimate_iso_maxmin(s).cumulative_hat[0] == pytest.approx(want)


def test_combined_is_midpoint_and_between(rng):
    for _ in range(20):
        s = random_jps(rng, set_size=4, q_count=3)
        lo = estimate_iso_minmax(s).cumulative_hat
        hi = estimate_iso_maxmin(s).cumulative_hat
        mid = estimate_iso_combined(s).cumulative_hat
        np.testing.assert_allclose(mid, (lo + hi) / 2, atol=1e-14)
        assert np.all(mid >= np.minimum(lo, hi) - 1e-14)
        assert np.all(mid <= np.maximum(lo, hi) + 1e-14)


def test_pava_matches_window_formulas(rng):
    # the production per-stratum isotonized matrices equal the explicit
    # window enumerations, column by column
    for _ in range(40):
        s = random_jps(rng, set_size=int(rng.integers(2, 6)))
        vals, sizes = in_stratum_values(s)
        left, right = isotonize_with_imputation(vals, sizes)
        for j in range(vals.shape[1]):
            np.testing.assert_allclose(
                left[:, j], window_minmax(vals[:, j], sizes), atol=1e-12
            )
            np.testing.assert_allclose(
                right[:, j], window_maxmin(vals[:, j], sizes), atol=1e-12
            )


def test_pava_matches_grid_oracle(rng):
    for _ in range(10):
        s = random_jps(rng, set_size=4, q_count=3)
        vals, sizes = in_stratum_values(s)
        occ = sizes > 0
        left, _ = isotonize_with_imputation(vals, sizes)
        for j in range(vals.shape[1]):
            want = grid_monotone_fit(vals[occ, j], sizes[occ])
            np.testing.assert_allclose(left[occ, j], want, atol=1.5e-3)


def test_estimates_are_valid_distributions(rng):
    for _ in range(25):
        s = random_jps(rng)
        estimators = [estimate_standard_jps, estimate_iso_drop_empty,
                      estimate_iso_minmax, estimate_iso_maxmin,
                      estimate_iso_combined, estimate_ml]
        for est in estimators:
            r = est(s)
            chat = r.cumulative_hat
            assert np.all(chat >= -1e-9) and np.all(chat <= 1 + 1e-9)
            assert np.all(np.diff(chat) >= -1e-9)
            assert r.proportions_hat.sum() == pytest.approx(1.0, abs=1e-9)
