"""Compare the compiled kernels against the pure-python fallback.

Run as a script; it times the three hot operations on workloads shaped like
the Monte-Carlo studies (many small problems, called in a tight loop).

    python3 benchmarks/bench_kernels.py
"""

import timeit

import numpy as np

from jpsord.kernels import available_backends


def _workloads(rng):
    h_size, q_count = 6, 3
    cum = np.array([0.3, 0.7, 1.0])
    counts = rng.integers(0, 6, size=(h_size, q_count)).astype(float)
    c_grid = [np.sort(rng.uniform(0.05, 0.95, q_count - 1)) for _ in range(64)]
    pava_vals = [rng.uniform(0.0, 1.0, h_size) for _ in range(64)]
    pava_wts = [rng.integers(1, 8, h_size).astype(float) for _ in range(64)]
    return cum, counts, c_grid, pava_vals, pava_wts


def bench(module, name, repeats=5):
    rng = np.random.default_rng(11)
    cum, counts, c_grid, pava_vals, pava_wts = _workloads(rng)

    def run_pmf():
        for h in range(1, 7):
            module.order_stat_pmf(h, 6, cum)

    def run_loglik():
        for c in c_grid:
            module.loglik_from_counts(counts, c)
            module.loglik_grad_from_counts(counts, c)

    def run_pava():
        for v, w in zip(pava_vals, pava_wts):
            module.pava_non_increasing(v, w)

    print(f"backend: {name}")
    for label, fn, number in (
        ("order-statistic pmf (6 strata)", run_pmf, 2000),
        ("log-likelihood + gradient (64 points)", run_loglik, 200),
        ("monotone pooling (64 vectors)", run_pava, 500),
    ):
        best = min(timeit.repeat(fn, number=number, repeat=repeats)) / number
        print(f"  {label:42s} {best * 1e6:9.2f} us/call")


def main():
    backends = available_backends()
    for name, module in backends.items():
        bench(module, name)
    if len(backends) < 2:
        print("note: compiled backend unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
