"""Benchmark the compiled weight-exponent kernels against the pure-Python twin.

Both backends implement the same contract (adaptive-Simpson layer
integral for the weight exponent in log scale, plus the bracketed
inverse of the scaled exponent); this script times them side by side
and checks that they agree to tight tolerance on every workload.

Run from the repository root after installing the package:

    python3 benchmarks/bench_weightcore.py
    python3 benchmarks/bench_weightcore.py --points 400 --repeat 7
"""

import argparse
import math
import time

from loglip import _weightcore_py as py_core

try:
    from loglip import _weightcore as c_core
except ImportError:
    c_core = None

LAMS = (1.5, 2.0, 3.0, 5.0)


def _y_grid(points):
    # geometric sweep through the steep boundary layer near y = 0.05
    # up to the flat region near 1; excludes the trivial y = 1 endpoint
    lo, hi = math.log(0.05), math.log(0.999)
    return [math.exp(lo + (hi - lo) * i / (points - 1)) for i in range(points)]


def _z_grid(points):
    return [-(10.0 ** (-3.0 + 6.0 * i / (points - 1))) for i in range(points)]


def _best_of(repeat, fn):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(points):
    ys = _y_grid(points)
    zs = _z_grid(max(4, points // 8))

    def scalar_exponent(core):
        for lam in LAMS:
            for y in ys:
                core.log_abs_exponent(lam, y)

    def grid_exponent(core):
        for lam in LAMS:
            core.log_abs_exponent_grid(lam, ys)

    def inverse(core):
        for lam in LAMS:
            for z in zs:
                core.scaled_exponent_inverse(lam, z)

    calls = {
        "log_abs_exponent": (scalar_exponent, len(LAMS) * len(ys)),
        "log_abs_exponent_grid": (grid_exponent, len(LAMS) * len(ys)),
        "scaled_exponent_inverse": (inverse, len(LAMS) * len(zs)),
    }
    return calls, ys, zs


def agreement(ys, zs):
    """Worst relative disagreement between the two backends."""
    worst = 0.0
    for lam in LAMS:
        for y in ys:
            a = c_core.log_abs_exponent(lam, y)
            b = py_core.log_abs_exponent(lam, y)
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
        for z in zs:
            a = c_core.scaled_exponent_inverse(lam, z)
            b = py_core.scaled_exponent_inverse(lam, z)
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=200,
                        help="y-grid size per steepness value (default 200)")
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions, best is kept (default 5)")
    args = parser.parse_args()

    calls, ys, zs = workloads(args.points)

    if c_core is None:
        print("compiled kernels unavailable; timing the pure-Python backend only")
    else:
        print(f"backend agreement: worst relative difference {agreement(ys, zs):.3e}")

    header = f"{'workload':<26}{'calls':>7}{'python':>12}{'compiled':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, (fn, n_calls) in calls.items():
        t_py = _best_of(args.repeat, lambda: fn(py_core))
        if c_core is None:
            print(f"{name:<26}{n_calls:>7}{1e6 * t_py / n_calls:>10.1f}us{'--':>12}{'--':>9}")
            continue
        t_c = _best_of(args.repeat, lambda: fn(c_core))
        print(
            f"{name:<26}{n_calls:>7}{1e6 * t_py / n_calls:>10.1f}us"
            f"{1e6 * t_c / n_calls:>10.1f}us{t_py / t_c:>8.1f}x"
        )


if __name__ == "__main__":
    main()
