"""Estimators of ordinal category proportions from JPS samples.

All estimators work through the per-stratum cumulative counts: for stratum h
(units judged to hold rank h) and category q, the in-stratum estimate of
P(X <= q) is the fraction of the stratum's units at or below q. The ranked
structure enters through two facts: in-stratum cumulative probabilities are
non-increasing in h for each q (larger judged ranks sit higher in the
distribution), and averaging the rank-stratum category pmfs over h recovers
the parent pmf. The isotonized family enforces the first fact; the likelihood
route models strata with order-statistic category probabilities built from
integer-parameter incomplete beta tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .kernels import backend
from .types import EstimateResult, JpsSample, StratumCounts

__all__ = [
    "MlOptions",
    "tabulate",
    "estimate_srs",
    "estimate_standard_jps",
    "log_likelihood",
    "estimate_ml",
    "estimate_iso_no_empty",
    "estimate_iso_drop_empty",
    "estimate_iso_minmax",
    "estimate_iso_maxmin",
    "estimate_iso_combined",
    "isotonize_with_imputation",
]


def tabulate(sample: JpsSample) -> StratumCounts:
    """Cross-tabulate a JPS sample into per-stratum cumulative counts."""
    H = sample.set_size
    Q = sample.num_categories
    occ = np.zeros((H, Q), dtype=np.int64)
    np.add.at(occ, (sample.ranks - 1, sample.values - 1), 1)
    cc = np.cumsum(occ, axis=1)
    return StratumCounts(
        cumulative_counts=cc,
        stratum_sizes=cc[:, -1],
        total_cumulative=cc.sum(axis=0),
    )


def estimate_srs(values, num_categories: int) -> EstimateResult:
    """Empirical cumulative proportions, ranks ignored."""
    values = np.asarray(values, dtype=np.int64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty vector")
    Q = int(num_categories)
    if Q < 1:
        raise ValueError("num_categories must be >= 1")
    if values.min() < 1 or values.max() > Q:
        raise ValueError(f"values must lie in 1..{Q}")
    counts = np.bincount(values, minlength=Q + 1)[1:]
    chat = np.cumsum(counts)[: Q - 1] / values.size
    return EstimateResult.from_cumulative(chat, method="srs")


def _stratum_cumulative(counts: StratumCounts) -> np.ndarray:
    """(H, Q-1) matrix of in-stratum cumulative proportions.

    Rows of empty strata are left at 0 and must be masked by the caller.
    """
    Q = counts.num_categories
    sizes = counts.stratum_sizes
    out = np.zeros((counts.set_size, Q - 1))
    mask = sizes > 0
    if Q > 1 and mask.any():
        out[mask] = counts.cumulative_counts[mask, : Q - 1] / sizes[mask, None]
    return out


def estimate_standard_jps(sample: JpsSample) -> EstimateResult:
    """Average of in-stratum cumulative proportions over non-empty strata.

    Each non-empty stratum contributes its cumulative fraction with equal
    weight; empty strata drop out of the average (the divisor is the number
    of non-empty strata).
    """
    counts = tabulate(sample)
    mask = counts.nonempty()
    chat_rows = _stratum_cumulative(counts)
    chat = chat_rows[mask].mean(axis=0)
    return EstimateResult.from_cumulative(chat, method="st")


@dataclass(frozen=True)
class MlOptions:
    """Options for the constrained likelihood fit.

    The cutoffs are kept inside [bound_lo, bound_hi] with pairwise gaps of at
    least ``min_gap``; ``start_gap`` is the spacing used when the starting
    point needs repair.
    """

    tolerance: float = 1e-9
    max_iterations: int = 1000
    bound_lo: float = 0.01
    bound_hi: float = 0.99
    min_gap: float = 1e-6
    start_gap: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.bound_lo < self.bound_hi < 1.0:
            raise ValueError("need 0 < bound_lo < bound_hi < 1")
        if self.tolerance <= 0.0 or self.max_iterations < 1:
            raise ValueError("tolerance must be > 0 and max_iterations >= 1")
        if not 0.0 < self.min_gap <= self.start_gap:
            raise ValueError("need 0 < min_gap <= start_gap")


def _occurrence_counts(counts: StratumCounts) -> np.ndarray:
    return np.diff(counts.cumulative_counts, axis=1, prepend=0).astype(float)


def log_likelihood(sample: JpsSample, c) -> float:
    """Rank-conditional log-likelihood of cutoffs ``c`` (length Q-1).

    Each unit contributes the log of its stratum's category probability; the
    top category's probability is one minus the sum of the others. Returns
    -inf when a category that occurs in the sample gets a non-positive
    probability (a numerical guard; strictly increasing interior cutoffs give
    positive probabilities analytically).
    """
    c = np.ascontiguousarray(c, dtype=float)
    Q = sample.num_categories
    if c.shape != (Q - 1,):
        raise ValueError(f"c must have length {Q - 1}, got shape {c.shape}")
    if Q > 1:
        if c.min() <= 0.0 or c.max() >= 1.0:
            raise ValueError(f"cutoffs must lie strictly inside (0, 1), got {c}")
        if np.any(np.diff(c) <= 0.0):
            raise ValueError(f"cutoffs must be strictly increasing, got {c}")
    occ = _occurrence_counts(tabulate(sample))
    return float(backend.loglik_from_counts(occ, c))


def _repair_start(chat: np.ndarray, opts: MlOptions) -> np.ndarray:
    """Clip a starting point into the constraint box and enforce strict order."""
    g = opts.start_gap
    c = np.clip(chat, opts.bound_lo + g, opts.bound_hi - g)
    for j in range(1, c.size):
        if c[j] < c[j - 1] + g:
            c[j] = c[j - 1] + g
    for j in range(c.size - 2, -1, -1):
        if c[j] > c[j + 1] - g:
            c[j] = c[j + 1] - g
    if c.size and (c[0] <= opts.bound_lo or c[-1] >= opts.bound_hi):
        raise ValueError(
            f"cannot place {c.size} cutoffs with gap {g} inside "
            f"[{opts.bound_lo}, {opts.bound_hi}]"
        )
    return c


def _barrier_value(c: np.ndarray, opts: MlOptions) -> float:
    lo = c - opts.bound_lo
    hi = opts.bound_hi - c
    if lo.min() <= 0.0 or hi.min() <= 0.0:
        return -np.inf
    val = float(np.sum(np.log(lo)) + np.sum(np.log(hi)))
    if c.size > 1:
        gaps = np.diff(c) - opts.min_gap
        if gaps.min() <= 0.0:
            return -np.inf
        val += float(np.sum(np.log(gaps)))
    return val


def _barrier_grad(c: np.ndarray, opts: MlOptions) -> np.ndarray:
    g = 1.0 / (c - opts.bound_lo) - 1.0 / (opts.bound_hi - c)
    if c.size > 1:
        inv = 1.0 / (np.diff(c) - opts.min_gap)
        g[:-1] -= inv
        g[1:] += inv
    return g


def estimate_ml(sample: JpsSample, options: Optional[MlOptions] = None) -> EstimateResult:
    """Constrained maximum likelihood under the order-statistic stratum model.

    Maximizes the rank-conditional log-likelihood over cutoffs kept strictly
    increasing inside the option bounds, via a log-barrier with backtracking
    gradient ascent inside each barrier stage. The returned point is the
    best-likelihood feasible iterate ever visited, so the fit never ends
    below its starting value. Non-convergence within the iteration budget is
    flagged in the diagnostics, not raised.
    """
    opts = options or MlOptions()
    counts = tabulate(sample)
    Q = counts.num_categories
    if Q == 1:
        return EstimateResult.from_cumulative(
            np.empty(0), method="ml",
            diagnostics={"converged": True, "iterations": 0,
                         "loglik": 0.0, "loglik_start": 0.0},
        )
    occ = _occurrence_counts(counts)
    start = _repair_start(estimate_standard_jps(sample).cumulative_hat, opts)

    def ll(c):
        return float(backend.loglik_from_counts(occ, c))

    c = start.copy()
    ll_c = ll(c)
    best_ll, best_c = ll_c, c.copy()
    iterations = 0
    exhausted = False
    last_stage_change = np.inf
    alpha = None
    for mu in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
        stage_start_ll = ll_c
        stage_tol = max(opts.tolerance, mu * 1e-4)
        phi = ll_c + mu * _barrier_value(c, opts)
        for _ in range(200):
            if iterations >= opts.max_iterations:
                exhausted = True
                break
            iterations += 1
            grad = backend.loglik_grad_from_counts(occ, c) + mu * _barrier_grad(c, opts)
            gnorm = float(np.linalg.norm(grad))
            if gnorm == 0.0:
                break
            if alpha is None:
                alpha = 1.0 / (1.0 + gnorm)
            else:
                alpha = min(alpha * 4.0, 1e3)
            moved = False
            while alpha > 1e-16:
                cand = c + alpha * grad
                cand_ll = ll(cand)
                if np.isfinite(cand_ll):
                    cand_phi = cand_ll + mu * _barrier_value(cand, opts)
                    if cand_phi >= phi + 1e-4 * alpha * gnorm * gnorm:
                        improvement = cand_phi - phi
                        c, ll_c, phi = cand, cand_ll, cand_phi
                        if ll_c > best_ll:
                            best_ll, best_c = ll_c, c.copy()
                        moved = improvement >= stage_tol
                        break
                alpha *= 0.5
            if not moved:
                break
        last_stage_change = abs(ll_c - stage_start_ll)
        if exhausted:
            break
    converged = (not exhausted) and last_stage_change < opts.tolerance
    return EstimateResult.from_cumulative(
        best_c, method="ml",
        diagnostics={
            "converged": bool(converged),
            "iterations": iterations,
            "loglik": best_ll,
            "loglik_start": ll(start),
        },
    )


def _neighbor_indices(mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """For each position, the nearest True index at-or-before / at-or-after.

    Positions before the first True (resp. after the last) borrow from the
    other side, implementing the boundary rule for empty strata.
    """
    H = mask.size
    idx = np.arange(H)
    left = np.where(mask, idx, -1)
    left = np.maximum.accumulate(left)
    right = np.where(mask, idx, H)
    right = np.minimum.accumulate(right[::-1])[::-1]
    left = np.where(left < 0, right, left)
    right = np.where(right >= H, left, right)
    return left, right


def isotonize_with_imputation(values: np.ndarray, weights: np.ndarray
                              ) -> Tuple[np.ndarray, np.ndarray]:
    """Column-wise non-increasing fit over positive-weight strata, then
    imputation of zero-weight strata.

    ``values`` is (H, Qm1); rows with ``weights == 0`` are ignored by the fit.
    Returns the left-imputed matrix (each zero-weight stratum copies the
    nearest fitted stratum above it in rank order, i.e. to its left) and the
    right-imputed matrix; a zero-weight stratum at a boundary copies the
    nearest fitted stratum from the other side in both variants.
    """
    H, Qm1 = values.shape
    mask = weights > 0
    if not mask.any():
        raise ValueError("need at least one stratum with positive weight")
    iso = np.zeros_like(values)
    w = np.ascontiguousarray(weights[mask], dtype=float)
    for j in range(Qm1):
        col = np.ascontiguousarray(values[mask, j], dtype=float)
        iso[mask, j] = backend.pava_non_increasing(col, w)
    left_idx, right_idx = _neighbor_indices(mask)
    return iso[left_idx], iso[right_idx]


def _iso_matrices(sample: JpsSample):
    counts = tabulate(sample)
    chat_rows = _stratum_cumulative(counts)
    weights = counts.stratum_sizes.astype(float)
    left, right = isotonize_with_imputation(chat_rows, weights)
    return counts, left, right


def estimate_iso_no_empty(sample: JpsSample) -> EstimateResult:
    """Isotonized estimator requiring every stratum to be non-empty.

    Per category, the in-stratum cumulative proportions are projected onto
    non-increasing sequences (weights = stratum sizes) and averaged with
    equal weight 1/H.
    """
    counts = tabulate(sample)
    empty = np.flatnonzero(~counts.nonempty()) + 1
    if empty.size:
        raise ValueError(
            f"strata {empty.tolist()} are empty; use estimate_iso_drop_empty "
            "or the imputation variants"
        )
    chat_rows = _stratum_cumulative(counts)
    weights = counts.stratum_sizes.astype(float)
    left, _ = isotonize_with_imputation(chat_rows, weights)
    return EstimateResult.from_cumulative(left.mean(axis=0), method="iso")


def estimate_iso_drop_empty(sample: JpsSample) -> EstimateResult:
    """Isotonized estimator that ignores empty strata.

    The non-increasing fit runs over the non-empty strata and the average is
    normalized by their count; with no empty strata this coincides with
    ``estimate_iso_no_empty``.
    """
    counts, left, _ = _iso_matrices(sample)
    mask = counts.nonempty()
    return EstimateResult.from_cumulative(left[mask].mean(axis=0), method="iso")


def estimate_iso_minmax(sample: JpsSample) -> EstimateResult:
    """Isotonized estimator imputing empty strata from the left.

    Empty strata take the nearest fitted stratum of smaller rank (boundary
    empties copy from the other side); the average runs over all H strata.
    """
    _, left, _ = _iso_matrices(sample)
    return EstimateResult.from_cumulative(left.mean(axis=0), method="iso_minus")


def estimate_iso_maxmin(sample: JpsSample) -> EstimateResult:
    """Isotonized estimator imputing empty strata from the right."""
    _, _, right = _iso_matrices(sample)
    return EstimateResult.from_cumulative(right.mean(axis=0), method="iso_plus")


def estimate_iso_combined(sample: JpsSample) -> EstimateResult:
    """Midpoint of the left- and right-imputing isotonized estimators."""
    _, left, right = _iso_matrices(sample)
    chat = 0.5 * (left.mean(axis=0) + right.mean(axis=0))
    return EstimateResult.from_cumulative(chat, method="iso_star")
