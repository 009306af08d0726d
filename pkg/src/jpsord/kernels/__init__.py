"""Numerical kernels with a compiled fast path.

The compiled extension (``_ckernels``, built from Cython) is preferred when
importable; otherwise the pure-NumPy module ``_pykernels`` takes over with
identical semantics. Set ``JPSORD_KERNELS=python`` to force the fallback or
``JPSORD_KERNELS=cython`` to fail loudly when the extension is missing.

Public wrapper functions validate their inputs; the selected backend module
is exposed as ``backend`` for internal hot-path callers that have already
validated.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

__all__ = [
    "BACKEND",
    "backend",
    "available_backends",
    "regularized_incomplete_beta",
    "order_stat_category_pmf",
    "pava_non_increasing",
]

_choice = os.environ.get("JPSORD_KERNELS", "").strip().lower()
_compiled = None
if _choice != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _choice == "cython":
            raise ImportError(
                "JPSORD_KERNELS=cython but the compiled extension is not built; "
                "reinstall with a C compiler available or unset the variable"
            )
        _compiled = None

backend = _compiled if _compiled is not None else _pykernels
BACKEND = backend.NAME


def available_backends() -> dict:
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    found = {_pykernels.NAME: _pykernels}
    if _compiled is not None:
        found[_compiled.NAME] = _compiled
    return found


def regularized_incomplete_beta(x: float, h: int, m: int) -> float:
    """Regularized incomplete beta function I_x(h, m) for integer parameters.

    Evaluated exactly through the binomial tail identity with H = h + m - 1
    (a finite sum; no quadrature), which is the form the rank-stratum category
    probabilities need.

    Parameters
    ----------
    x : point in [0, 1]
    h, m : positive integers

    Returns
    -------
    float in [0, 1], non-decreasing in x.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    h = int(h)
    m = int(m)
    if h < 1 or m < 1:
        raise ValueError(f"h and m must be positive integers, got h={h}, m={m}")
    return float(backend.betatail(x, h, m))


def order_stat_category_pmf(h: int, set_size: int, cumulative) -> np.ndarray:
    """Category pmf of the h-th order statistic among ``set_size`` draws.

    Parameters
    ----------
    h : judgment rank, 1 <= h <= set_size
    set_size : comparison-set size H
    cumulative : parent cumulative probabilities, length Q, strictly
        increasing, entries in (0, 1], final entry exactly 1 (c_0 = 0 is
        applied internally)

    Returns
    -------
    Length-Q probability vector; averaging it over h = 1..H recovers the
    parent pmf.
    """
    h = int(h)
    set_size = int(set_size)
    if not 1 <= h <= set_size:
        raise ValueError(f"rank h must lie in 1..{set_size}, got {h}")
    c = np.ascontiguousarray(cumulative, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("cumulative must be a non-empty vector")
    if c[-1] != 1.0:
        raise ValueError(f"final cumulative entry must be exactly 1, got {c[-1]!r}")
    if c[0] <= 0.0 or np.any(np.diff(c) <= 0.0):
        raise ValueError(f"cumulative must be strictly increasing within (0, 1], got {c}")
    return np.asarray(backend.order_stat_pmf(h, set_size, c))


def pava_non_increasing(values, weights=None) -> np.ndarray:
    """Weighted least-squares fit of a non-increasing sequence.

    Parameters
    ----------
    values : sequence to project
    weights : positive weights, same length (defaults to all ones)

    Returns
    -------
    The projection: non-increasing, within the range of ``values``, and equal
    to ``values`` when the input is already non-increasing.
    """
    v = np.ascontiguousarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a non-empty vector")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.ascontiguousarray(weights, dtype=float)
    if w.shape != v.shape:
        raise ValueError("weights must match values in length")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive and finite")
    return np.asarray(backend.pava_non_increasing(v, w))
