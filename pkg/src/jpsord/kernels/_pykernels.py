"""Pure-NumPy kernel implementations.

This module is the reference backend: the compiled extension in
``_ckernels.pyx`` mirrors these functions one for one. Keep the two in sync;
the test suite cross-checks them whenever the extension is importable.

All functions assume validated inputs (see ``jpsord.kernels`` wrappers):
``c`` vectors are float64, strictly increasing, inside (0, 1); count matrices
are float64 with shape (H, Q) holding (exactly representable) integer counts.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _comb_row(H: int) -> np.ndarray:
    """Binomial coefficients C(H, 0..H) via the multiplicative recurrence.

    Exact in float64 for every H this package meets (each coefficient is an
    integer far below 2**53), and the same recurrence the compiled backend
    uses, so the two agree digit for digit.
    """
    row = np.empty(H + 1)
    row[0] = 1.0
    for t in range(H):
        row[t + 1] = row[t] * (H - t) / (t + 1)
    return row


def betatail(x: float, h: int, m: int) -> float:
    """Regularized incomplete beta I_x(h, m) for positive integer h, m.

    Uses the closed binomial-tail form with H = h + m - 1:

        I_x(h, m) = sum_{t=h}^{H} C(H, t) x^t (1 - x)^(H - t)

    which is exact for integer parameters (no quadrature involved).
    """
    H = h + m - 1
    comb = _comb_row(H)
    s = 0.0
    for t in range(h, H + 1):
        s += comb[t] * x ** t * (1.0 - x) ** (H - t)
    return s


def order_stat_pmf(h: int, H: int, cumulative: np.ndarray) -> np.ndarray:
    """Category pmf of the h-th order statistic of H draws from the parent.

    ``cumulative`` is the parent's full cumulative vector (length Q, final
    entry exactly 1). Entry q is I_{c_q}(h, H-h+1) - I_{c_{q-1}}(h, H-h+1)
    with c_0 = 0 applied internally.
    """
    Q = cumulative.shape[0]
    out = np.empty(Q)
    b_prev = 0.0
    for q in range(Q):
        b = betatail(float(cumulative[q]), h, H - h + 1)
        out[q] = b - b_prev
        b_prev = b
    return out


def _tail_matrix(H: int, c: np.ndarray) -> np.ndarray:
    """I_{c_j}(h, H-h+1) for h = 1..H (rows) and each cutoff in c (columns)."""
    t = np.arange(H + 1)
    terms = _comb_row(H) * c[:, None] ** t * (1.0 - c[:, None]) ** (H - t)
    # suffix sums over t give the tail for every h at once
    tails = np.cumsum(terms[:, ::-1], axis=1)[:, ::-1]
    return tails[:, 1:].T.copy()


def _pmf_matrix(H: int, c: np.ndarray) -> np.ndarray:
    """(H, Q) matrix of in-stratum category probabilities at cutoffs ``c``.

    The last column is computed as one minus the sum of the others, matching
    how the likelihood treats the top category.
    """
    Q = c.shape[0] + 1
    pmf = np.empty((H, Q))
    if Q == 1:
        pmf[:, 0] = 1.0
        return pmf
    tails = _tail_matrix(H, c)
    pmf[:, 0] = tails[:, 0]
    if Q > 2:
        pmf[:, 1:Q - 1] = np.diff(tails, axis=1)
    pmf[:, Q - 1] = 1.0 - pmf[:, :Q - 1].sum(axis=1)
    return pmf


def loglik_from_counts(counts: np.ndarray, c: np.ndarray) -> float:
    """Rank-conditional log-likelihood from per-(stratum, category) counts.

    ``counts[h-1, q-1]`` is the number of units with rank h and category q.
    Returns -inf when any category that actually occurs gets a non-positive
    model probability at ``c``.
    """
    H, Q = counts.shape
    if Q == 1:
        return 0.0
    pmf = _pmf_matrix(H, c)
    occupied = counts > 0
    if np.any(pmf[occupied] <= 0.0):
        return -np.inf
    ll = float(np.sum(counts[occupied] * np.log(pmf[occupied])))
    return ll


def loglik_grad_from_counts(counts: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Gradient of ``loglik_from_counts`` in the cutoffs ``c``.

    Only valid where the log-likelihood is finite; the d/dc_j term couples the
    two categories adjacent to cutoff j through the order-statistic density

        b_h(x) = h * C(H, h) * x^(h-1) * (1-x)^(H-h).
    """
    H, Q = counts.shape
    grad = np.zeros(Q - 1)
    if Q == 1:
        return grad
    pmf = _pmf_matrix(H, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(counts > 0, counts / pmf, 0.0)
    comb = _comb_row(H)
    hs = np.arange(1, H + 1)
    t = np.arange(H)
    xpow = c[:, None] ** t        # (Q-1, H): c^0..c^(H-1)
    ompow = (1.0 - c[:, None]) ** t
    # density[h-1, j] = h * C(H, h) * c_j^(h-1) * (1-c_j)^(H-h)
    density = (hs * comb[1:])[:, None] * xpow.T * ompow.T[::-1, :]
    for j in range(Q - 1):
        grad[j] = float(np.dot(density[:, j], ratio[:, j] - ratio[:, j + 1]))
    return grad


def pava_non_increasing(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted least-squares projection onto non-increasing sequences.

    Pool-adjacent-violators with a block stack. Final block levels are
    recomputed left to right over the original entries so the result matches
    a direct window-mean evaluation digit for digit.
    """
    n = values.shape[0]
    start = np.empty(n, dtype=np.int64)   # block start indices
    wsum = np.empty(n)
    vsum = np.empty(n)                    # sum of w*v per block
    nb = 0
    for i in range(n):
        start[nb] = i
        wsum[nb] = weights[i]
        vsum[nb] = weights[i] * values[i]
        nb += 1
        # merge while the previous block mean is below the last (violation)
        while nb >= 2 and vsum[nb - 2] * wsum[nb - 1] < vsum[nb - 1] * wsum[nb - 2]:
            wsum[nb - 2] += wsum[nb - 1]
            vsum[nb - 2] += vsum[nb - 1]
            nb -= 1
    out = np.empty(n)
    for b in range(nb):
        lo = start[b]
        hi = start[b + 1] if b + 1 < nb else n
        ws = 0.0
        vs = 0.0
        for i in range(lo, hi):
            ws += weights[i]
            vs += weights[i] * values[i]
        out[lo:hi] = vs / ws
    return out
