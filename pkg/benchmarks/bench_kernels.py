"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""
import argparse
import time

import numpy as np

from muhf import _pure
from muhf.features import LookbackSpec, trade_signs
from muhf.market_data import SynthConfig, synthesize_ticks

try:
    from muhf import _core
except ImportError:  # extension not built
    _core = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    rng = np.random.default_rng(0)
    n_smo = 800 if quick else 3000
    v = rng.standard_normal(200_000)
    A, B = rng.standard_normal((2000, 32)), rng.standard_normal((1500, 32))
    coef = rng.standard_normal(1500)
    X = rng.standard_normal((n_smo, 32))
    y = np.where(X[:, :4].sum(1) + rng.standard_normal(n_smo) > 1.5, 1.0, -1.0)
    gamma = 1.0 / X.shape[1]
    s = synthesize_ticks(SynthConfig(seed=1, duration_s=1800 if quick else 7200,
                                     flow_strength=0.5))
    spec = LookbackSpec()
    d1 = np.array([int(a * 1000) for a, _ in spec.windows], dtype=np.int64)
    d2 = np.array([int(b * 1000) for _, b in spec.windows], dtype=np.int64)
    rel = (s.ask_px - s.bid_px) / (s.bid_px + s.ask_px) * 2.0
    anchors = np.arange(s.session_open + 30_000, s.session_close - 5_000, 5_000,
                        dtype=np.int64)
    feat = (s.t_ms, s.interval_volume.astype(float), s.mid, s.trade_px,
            s.ask_sz.astype(float), s.bid_sz.astype(float), rel,
            trade_signs(s).astype(float), s.open_interest.astype(float), anchors, d1, d2)
    return {
        "window_means n=2e5 N=400": lambda k: k.window_means(v, 400),
        "kernel_matrix 2000x1500x32": lambda k: k.kernel_matrix(A, B, gamma, 0),
        "decision_values 2000 x 1500 SV": lambda k: k.decision_values(A, B, coef, 0.1,
                                                                      gamma, 0),
        f"smo_solve n={n_smo} d=32": lambda k: k.smo_solve(X, y, 1.0, gamma, 0, 1e-3,
                                                           50 * n_smo, 256),
        f"feature_block {anchors.size} anchors": lambda k: k.feature_block(*feat),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller SMO and feature inputs")
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not importable; only the fallback is timed")
    print(f"{'kernel':36s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, fn in cases(args.quick).items():
        py = _best(lambda: fn(_pure), args.repeat)
        if _core is None:
            print(f"{name:36s} {'-':>10s} {py:10.4f} {'-':>8s}")
            continue
        cy = _best(lambda: fn(_core), args.repeat)
        print(f"{name:36s} {cy:10.4f} {py:10.4f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
