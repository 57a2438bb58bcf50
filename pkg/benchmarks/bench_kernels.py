"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best-of-N wall time per call and the speedup. Outputs of
the two backends are compared before timing.
"""

import argparse
import timeit

import numpy as np

from excon import _pykernels
from excon.rocket import generate_kernels

try:
    from excon import _ckernels
except ImportError:
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20, 88))
    B = rng.normal(size=(380, 88))
    yield "max_cross_distance 20x380 d=88", "max_cross_distance", (A, B)

    ycs = np.cumsum(rng.normal(size=64))
    taus = np.unique(np.round(np.exp(np.linspace(np.log(5), np.log(32), 50))).astype(np.int64))
    yield "fluct_fvals n=64 (rescaled range)", "fluct_fvals", (ycs, taus, False)
    yield "fluct_fvals n=64 (detrended)", "fluct_fvals", (ycs, taus, True)

    y = rng.normal(size=64)
    n = int(y.max() / 0.01 + 1)
    yield "outlier_stats n=64", "outlier_stats", (y, n, 0.01)

    X = rng.normal(size=(50, 64, 4))
    t = generate_kernels(64, 4, 500, seed=1)
    yield "rocket_apply 50x64x4, 500 kernels", "rocket_apply", (
        X, t.weights, t.lengths, t.biases, t.dilations, t.paddings, t.channels)


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=0, equal_nan=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the NumPy backend is available")
    print(f"{'kernel':40s} {'numpy':>12s} {'compiled':>12s} {'speedup':>8s}")
    for label, name, call_args in cases():
        py_fn = getattr(_pykernels, name)
        t_py = best_time(py_fn, call_args, args.repeat)
        if _ckernels is None:
            print(f"{label:40s} {t_py * 1e6:10.1f}us {'-':>12s} {'-':>8s}")
            continue
        c_fn = getattr(_ckernels, name)
        if not agree(py_fn(*call_args), c_fn(*call_args)):
            raise SystemExit(f"{name}: backends disagree")
        t_c = best_time(c_fn, call_args, args.repeat)
        print(f"{label:40s} {t_py * 1e6:10.1f}us {t_c * 1e6:10.1f}us {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
