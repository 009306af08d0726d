"""Estimators for judgment post-stratified samples scored by several rankers.

Each measured unit carries one rank per ranker.  Rankers are blended through
weights proportional to the absolute sample correlation between their ranking
scores and the measured category, which gives every unit a fractional
membership in each stratum.  A proportional-odds regression fit doubles as a
learned ranker: fresh comparison units are scored by the linear predictor and
the measured unit is re-ranked within that set before the usual stratum
averaging.

Sign convention for the regression model: P(X <= q | z) = sigmoid(a_q + b'z),
so a larger linear predictor means a stochastically smaller outcome.  The
re-ranking rule follows suit, handing bigger ranks to smaller scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimators import estimate_srs, estimate_standard_jps, isotonize_with_imputation
from .sampling import SeedLike, _lex_ranks, as_generator
from .types import EstimateResult, JpsSample, MultiRankerSample

__all__ = [
    "RankerWeights",
    "ranker_weights",
    "membership_matrix",
    "estimate_sm",
    "estimate_sm_star",
    "OlrModel",
    "olr_loglik",
    "olr_score",
    "fit_olr",
    "estimate_reg",
]


@dataclass(frozen=True)
class RankerWeights:
    """Per-ranker blending weights derived from observed ranking ability.

    ``deltas[k]`` is the weight of ranker k, proportional to the absolute
    Pearson correlation between that ranker's scores and the measured
    category.  ``degenerate`` is set when every correlation is zero and the
    weights fall back to uniform.
    """

    deltas: np.ndarray
    correlations: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        deltas = np.asarray(self.deltas, dtype=float)
        correlations = np.asarray(self.correlations, dtype=float)
        if deltas.ndim != 1 or correlations.shape != deltas.shape:
            raise ValueError("deltas and correlations must be vectors of equal length")
        if np.any(deltas < 0.0):
            raise ValueError(f"weights must be non-negative, got {deltas}")
        if abs(float(deltas.sum()) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {deltas.sum()!r}")
        deltas.flags.writeable = False
        correlations.flags.writeable = False
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "correlations", correlations)

    @property
    def num_rankers(self) -> int:
        return self.deltas.size


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Sample correlation; zero when either argument is constant."""
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.sqrt(float(ac @ ac) * float(bc @ bc))
    if denom == 0.0:
        return 0.0
    return float(ac @ bc) / denom


def ranker_weights(x, z) -> RankerWeights:
    """Weight rankers by how well their scores track the measured category.

    x is the vector of measured categories and z the matching matrix of
    ranking scores, one column per ranker.  When no ranker shows any
    correlation the weights are uniform and the result is flagged degenerate.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two measured units")
    if z.ndim != 2 or z.shape[0] != x.size:
        raise ValueError(f"score matrix must be {x.size} x K, got shape {z.shape}")
    if z.shape[1] == 0:
        raise ValueError("need at least one ranker column")
    corr = np.array([_pearson(x, z[:, k]) for k in range(z.shape[1])])
    total = float(np.abs(corr).sum())
    if total == 0.0:
        deltas = np.full(corr.size, 1.0 / corr.size)
        return RankerWeights(deltas, corr, degenerate=True)
    return RankerWeights(np.abs(corr) / total, corr)


def _weights_for(sample: MultiRankerSample, weights: Optional[RankerWeights]) -> RankerWeights:
    if weights is not None:
        if weights.num_rankers != sample.num_rankers:
            raise ValueError(
                f"weights cover {weights.num_rankers} rankers, sample has {sample.num_rankers}"
            )
        return weights
    if sample.scores is None:
        raise ValueError("sample has no ranker scores; pass weights explicitly")
    return ranker_weights(sample.values, sample.scores)


def membership_matrix(sample: MultiRankerSample, weights: Optional[RankerWeights] = None) -> np.ndarray:
    """Fractional stratum membership of each unit, an n x H matrix.

    Entry (i, h) accumulates the weights of the rankers that put unit i in
    stratum h+1.  Rows sum to one exactly because the weights do.
    """
    weights = _weights_for(sample, weights)
    n = sample.size
    gamma = np.zeros((n, sample.set_size))
    rows = np.arange(n)
    for k in range(sample.num_rankers):
        gamma[rows, sample.ranks[:, k] - 1] += weights.deltas[k]
    return gamma


def _weighted_stratum_cumulative(sample: MultiRankerSample, gamma: np.ndarray):
    """Per-stratum weighted cumulative fractions and the stratum weight totals."""
    q_count = sample.num_categories
    below = sample.values[:, None] <= np.arange(1, q_count)[None, :]
    totals = gamma.sum(axis=0)
    numer = gamma.T @ below.astype(float)
    frac = np.zeros_like(numer)
    occupied = totals > 0.0
    frac[occupied] = numer[occupied] / totals[occupied, None]
    return frac, totals


def estimate_sm(sample: MultiRankerSample, weights: Optional[RankerWeights] = None) -> EstimateResult:
    """Correlation-weighted stratum average of cumulative fractions.

    Each stratum contributes its membership-weighted cumulative fraction;
    strata that received no membership are left out and the divisor drops to
    the number of contributing strata.  Omitting ``weights`` derives them from
    the sample's stored ranker scores.
    """
    weights = _weights_for(sample, weights)
    gamma = membership_matrix(sample, weights)
    frac, totals = _weighted_stratum_cumulative(sample, gamma)
    occupied = totals > 0.0
    if not np.any(occupied):
        raise ValueError("no stratum received positive membership weight")
    chat = frac[occupied].sum(axis=0) / int(occupied.sum())
    return EstimateResult.from_cumulative(chat, "sm")


def estimate_sm_star(sample: MultiRankerSample, weights: Optional[RankerWeights] = None) -> EstimateResult:
    """Isotonized variant of the correlation-weighted estimator.

    The per-stratum fractions are pooled monotonically with weights equal to
    the ranker count times the stratum membership totals.  Strata with zero
    weight borrow the imputation rules for empty strata: the answer is the
    midpoint of the left-imputed and right-imputed averages.
    """
    weights = _weights_for(sample, weights)
    gamma = membership_matrix(sample, weights)
    frac, totals = _weighted_stratum_cumulative(sample, gamma)
    if not np.any(totals > 0.0):
        raise ValueError("no stratum received positive membership weight")
    pooled_weights = sample.num_rankers * totals
    left, right = isotonize_with_imputation(frac, pooled_weights)
    chat = 0.5 * (left.mean(axis=0) + right.mean(axis=0))
    return EstimateResult.from_cumulative(chat, "sm_star")


@dataclass(frozen=True)
class OlrModel:
    """Fitted proportional-odds model with common slopes.

    ``intercepts`` is strictly increasing so the implied cumulative
    probabilities are valid at every covariate value.  ``separation`` flags a
    slope that ran away during fitting, which usually means the categories are
    perfectly separable in the training data.
    """

    intercepts: np.ndarray
    slopes: np.ndarray
    converged: bool
    iterations: int
    loglik: float
    separation: bool = False

    def __post_init__(self):
        intercepts = np.asarray(self.intercepts, dtype=float)
        slopes = np.asarray(self.slopes, dtype=float)
        if intercepts.ndim != 1 or intercepts.size < 1:
            raise ValueError("need at least one intercept")
        if np.any(np.diff(intercepts) <= 0.0):
            raise ValueError(f"intercepts must be strictly increasing, got {intercepts}")
        if slopes.ndim != 1:
            raise ValueError("slopes must be a vector")
        intercepts.flags.writeable = False
        slopes.flags.writeable = False
        object.__setattr__(self, "intercepts", intercepts)
        object.__setattr__(self, "slopes", slopes)

    @property
    def num_categories(self) -> int:
        return self.intercepts.size + 1

    def linear_predictor(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.slopes.size:
            raise ValueError(f"need an m x {self.slopes.size} covariate matrix, got {z.shape}")
        return z @ self.slopes


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def _log_sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = -np.log1p(np.exp(-t[pos]))
    out[~pos] = t[~pos] - np.log1p(np.exp(t[~pos]))
    return out


def _cell_bounds(x, z, intercepts, slopes):
    s = z @ slopes if z.shape[1] else np.zeros(x.size)
    q_count = intercepts.size + 1
    upper = np.where(x <= q_count - 1, intercepts[np.minimum(x, q_count - 1) - 1] + s, np.inf)
    lower = np.where(x >= 2, intercepts[np.maximum(x, 2) - 2] + s, -np.inf)
    return upper, lower


def _check_olr_args(x, z, intercepts, slopes):
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0 or not np.issubdtype(x.dtype, np.integer):
        raise ValueError("categories must be a non-empty integer vector")
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] != x.size:
        raise ValueError(f"covariate matrix must have {x.size} rows, got shape {z.shape}")
    intercepts = np.asarray(intercepts, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if intercepts.ndim != 1 or intercepts.size < 1:
        raise ValueError("need at least one intercept")
    if np.any(np.diff(intercepts) <= 0.0):
        raise ValueError(f"intercepts must be strictly increasing, got {intercepts}")
    if slopes.shape != (z.shape[1],):
        raise ValueError(f"need {z.shape[1]} slopes, got shape {slopes.shape}")
    q_count = intercepts.size + 1
    if x.min() < 1 or x.max() > q_count:
        raise ValueError(f"categories must lie in 1..{q_count}")
    return x.astype(np.int64), z, intercepts, slopes


def olr_loglik(x, z, intercepts, slopes) -> float:
    """Proportional-odds log-likelihood of categories x given covariates z.

    Returns -inf when a category cell has zero probability at the given
    parameters instead of raising.
    """
    x, z, intercepts, slopes = _check_olr_args(x, z, intercepts, slopes)
    upper, lower = _cell_bounds(x, z, intercepts, slopes)
    # log cell = log sigmoid(upper) + log sigmoid(-lower) + log(1 - exp(lower - upper));
    # at most one bound is infinite, so lower - upper never produces inf - inf
    tail = -np.expm1(lower - upper)
    if np.any(tail <= 0.0):
        return float("-inf")
    total = _log_sigmoid(upper) + _log_sigmoid(-lower) + np.log(tail)
    value = float(total.sum())
    return value if np.isfinite(value) else float("-inf")


def olr_score(x, z, intercepts, slopes) -> np.ndarray:
    """Gradient of the log-likelihood, intercept entries then slope entries."""
    x, z, intercepts, slopes = _check_olr_args(x, z, intercepts, slopes)
    upper, lower = _cell_bounds(x, z, intercepts, slopes)
    su = _sigmoid(upper)
    sl = _sigmoid(lower)
    cell = np.maximum(su - sl, np.finfo(float).tiny)
    du = np.where(np.isfinite(upper), su * (1.0 - su), 0.0)
    dl = np.where(np.isfinite(lower), sl * (1.0 - sl), 0.0)
    ratio_u = du / cell
    ratio_l = dl / cell
    q_count = intercepts.size + 1
    grad_a = np.bincount(x - 1, weights=ratio_u, minlength=q_count)[: q_count - 1]
    has_lower = x >= 2
    grad_a -= np.bincount(x[has_lower] - 2, weights=ratio_l[has_lower], minlength=q_count - 1)[
        : q_count - 1
    ]
    grad_b = z.T @ (ratio_u - ratio_l)
    return np.concatenate([grad_a, grad_b])


def _theta_to_natural(theta: np.ndarray, q_count: int):
    # overflow to inf is fine here: the caller rejects non-finite intercepts
    with np.errstate(over="ignore"):
        gaps = np.exp(theta[1 : q_count - 1])
    intercepts = theta[0] + np.concatenate([[0.0], np.cumsum(gaps)])
    return intercepts, theta[q_count - 1 :]


def _natural_grad_to_theta(grad: np.ndarray, theta: np.ndarray, q_count: int) -> np.ndarray:
    grad_a = grad[: q_count - 1]
    out = np.empty_like(theta)
    out[0] = grad_a.sum()
    if q_count > 2:
        gaps = np.exp(theta[1 : q_count - 1])
        # suffix sums over the intercepts that each gap shifts
        out[1 : q_count - 1] = gaps * np.cumsum(grad_a[::-1])[::-1][1:]
    out[q_count - 1 :] = grad[q_count - 1 :]
    return out


def fit_olr(x, z, tolerance: float = 1e-6, max_iterations: int = 100) -> OlrModel:
    """Fit the proportional-odds model by damped Newton ascent.

    Intercepts are optimized through a log-gap reparameterization so they stay
    strictly increasing.  The Hessian comes from central differences of the
    analytic gradient; steps that fail to improve the likelihood trigger ridge
    damping that escalates tenfold until one does.  Convergence is declared on
    the gradient norm in the natural parameterization.  The default tolerance
    is loose enough to be reachable in double precision at realistic sample
    sizes (the likelihood itself only resolves changes of about |ll| * 1e-16)
    while staying orders of magnitude below any statistically meaningful
    parameter movement.
    """
    x = np.asarray(x)
    if x.ndim != 1 or not np.issubdtype(x.dtype, np.integer):
        raise ValueError("categories must be an integer vector")
    x = x.astype(np.int64)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] != x.size:
        raise ValueError(f"covariate matrix must have {x.size} rows, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("covariates must be finite")
    q_count = int(x.max()) if x.size else 0
    if x.size == 0 or x.min() < 1:
        raise ValueError("categories must be positive integers")
    present = np.unique(x)
    if present.size != q_count:
        missing = sorted(set(range(1, q_count + 1)) - set(present.tolist()))
        raise ValueError(f"every category must appear at least once; missing {missing}")
    if q_count < 2:
        raise ValueError("need at least two categories to fit the model")
    k_covs = z.shape[1]
    if x.size <= k_covs + q_count - 1:
        raise ValueError(
            f"need more than {k_covs + q_count - 1} observations to fit, got {x.size}"
        )

    counts = np.bincount(x - 1, minlength=q_count)
    chat = np.cumsum(counts)[: q_count - 1] / x.size
    alpha0 = np.log(chat) - np.log1p(-chat)
    theta = np.concatenate([[alpha0[0]], np.log(np.diff(alpha0)), np.zeros(k_covs)])
    dim = theta.size

    def natural(th):
        return _theta_to_natural(th, q_count)

    def ll_of(th):
        a, b = natural(th)
        # a wild damped step can underflow a log-gap to zero or overflow an
        # intercept; treat such candidates as infeasible instead of raising
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            return float("-inf")
        if a.size > 1 and np.any(np.diff(a) <= 0.0):
            return float("-inf")
        return olr_loglik(x, z, a, b)

    def grad_theta(th):
        a, b = natural(th)
        return _natural_grad_to_theta(olr_score(x, z, a, b), th, q_count)

    ll = ll_of(theta)
    iterations = 0
    converged = False
    for _ in range(max_iterations):
        a, b = natural(theta)
        g_nat = olr_score(x, z, a, b)
        if float(np.linalg.norm(g_nat)) < tolerance:
            converged = True
            break
        iterations += 1
        g = _natural_grad_to_theta(g_nat, theta, q_count)
        hess = np.empty((dim, dim))
        for j in range(dim):
            h = 1e-5 * max(1.0, abs(theta[j]))
            bump = np.zeros(dim)
            bump[j] = h
            hess[:, j] = (grad_theta(theta + bump) - grad_theta(theta - bump)) / (2.0 * h)
        hess = 0.5 * (hess + hess.T)
        lam = 0.0
        accepted = False
        for _attempt in range(30):
            try:
                step = np.linalg.solve(-hess + lam * np.eye(dim), g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                cand = theta + step
                cand_ll = ll_of(cand)
                if np.isfinite(cand_ll) and cand_ll > ll:
                    theta, ll = cand, cand_ll
                    accepted = True
                    break
            lam = 1e-8 if lam == 0.0 else lam * 10.0
        if not accepted:
            break
    else:
        a, b = natural(theta)
        g_nat = olr_score(x, z, a, b)
        converged = float(np.linalg.norm(g_nat)) < tolerance

    intercepts, slopes = natural(theta)
    separation = bool(np.any(np.abs(slopes) > 25.0))
    return OlrModel(
        intercepts=intercepts,
        slopes=slopes,
        converged=converged,
        iterations=iterations,
        loglik=ll,
        separation=separation,
    )


def estimate_reg(
    x,
    z,
    source,
    set_size: int,
    seed: SeedLike,
    *,
    num_categories: Optional[int] = None,
    tolerance: float = 1e-8,
    max_iterations: int = 100,
) -> EstimateResult:
    """Re-rank by a fitted regression score, then average within strata.

    A proportional-odds model trained on the measured units scores fresh
    comparison units drawn from ``source`` (anything with a
    ``draw_z(m, rng)`` method).  Each measured unit is ranked within its own
    comparison set, smaller linear predictors receiving bigger ranks with ties
    broken uniformly.  The stream order is one ``draw_z`` call for all fresh
    units followed by one tie-break block.  With a set size of one the ranks
    are degenerate and the result equals the plain sample estimate.
    """
    x = np.asarray(x)
    if x.ndim != 1 or not np.issubdtype(x.dtype, np.integer):
        raise ValueError("categories must be an integer vector")
    x = x.astype(np.int64)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != x.size:
        raise ValueError(f"covariate matrix must have {x.size} rows, got shape {z.shape}")
    if set_size < 1:
        raise ValueError(f"set size must be >= 1, got {set_size}")
    q_count = int(num_categories) if num_categories is not None else int(x.max())
    if x.max() > q_count:
        raise ValueError(f"categories exceed num_categories={q_count}")

    if set_size == 1:
        base = estimate_srs(x, q_count)
        return EstimateResult.from_cumulative(base.cumulative_hat, "reg", diagnostics={"olr": None})

    model = fit_olr(x, z, tolerance=tolerance, max_iterations=max_iterations)
    n = x.size
    rng = as_generator(seed)
    fresh = source.draw_z(n * (set_size - 1), rng)
    fresh = np.asarray(fresh, dtype=float)
    if fresh.shape != (n * (set_size - 1), z.shape[1]):
        raise ValueError(
            f"comparison source produced shape {fresh.shape}, "
            f"need {(n * (set_size - 1), z.shape[1])}"
        )
    scores = np.empty((n, set_size))
    scores[:, 0] = model.linear_predictor(z)
    scores[:, 1:] = fresh.reshape(n, set_size - 1, z.shape[1]) @ model.slopes
    tiebreak = rng.random((n, set_size))
    ranks = _lex_ranks(-scores, tiebreak)
    sample = JpsSample(values=x, ranks=ranks, set_size=set_size, num_categories=q_count)
    base = estimate_standard_jps(sample)
    diagnostics = {
        "olr": {
            "converged": model.converged,
            "iterations": model.iterations,
            "separation": model.separation,
            "slopes": model.slopes.tolist(),
        },
        "ranks": ranks.tolist(),
    }
    return EstimateResult.from_cumulative(base.cumulative_hat, "reg", diagnostics=diagnostics)
