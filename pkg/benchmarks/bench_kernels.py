"""Time the numba and numpy kernel backends on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each workload is run once per backend to warm up (numba compiles on first
call), then timed ``--repeat`` times; the best time is reported together
with the largest relative difference between the two backends' results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from umdlpq import kernels
from umdlpq._accel import HAVE_NUMBA
from umdlpq.mixed_norm import build_E_n
from umdlpq.witness import amplify, base_witness_E1, evaluate, normalized


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads(quick: bool):
    rng = np.random.default_rng(0)
    chain = build_E_n(2, 4, 3)
    X = rng.standard_normal((20_000 if quick else 200_000, chain.dim))
    yield "chain_norms E_3(2,4)", lambda: kernels.chain_norms(X, chain.kernel_args)

    e1 = build_E_n(1.2, 8, 1)
    signs = kernels.sign_matrix(9)
    F = rng.standard_normal((9, 256, e1.dim))
    w = np.full(256, 1 / 256)
    yield "combo_powers 2^9 signs x 256 atoms", lambda: kernels.combo_powers(signs, F, w, 2.0, e1.kernel_args)

    axis = np.linspace(0, 10, 81 if quick else 201)
    yield f"grid_ratios {axis.size}^3", lambda: kernels.grid_ratios(0, 2.0, 4.0, axis, axis, axis)

    base = normalized(base_witness_E1(2, 4, (0.45, 0.77), (0.0, 1.3)))
    w2 = amplify(base, base)
    lazy = amplify(base, base if quick else w2, max_scalars=0)
    yield f"stream_amplified {lazy.n_atoms} atoms", lambda: evaluate(lazy).ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; timing the numpy backend only")
    print(f"{'workload':40s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in workloads(args.quick):
        res = {}
        for b in (("numba", "numpy") if HAVE_NUMBA else ("numpy",)):
            with kernels.backend(b):
                fn()  # warm-up / compile
                res[b] = _best(fn, args.repeat)
        tn = res["numpy"][0]
        if "numba" in res:
            tb = res["numba"][0]
            a, b = np.asarray(res["numba"][1]), np.asarray(res["numpy"][1])
            diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
            print(f"{name:40s} {tb:10.4f} {tn:10.4f} {tn / tb:8.1f} {diff:13.2e}")
        else:
            print(f"{name:40s} {'-':>10s} {tn:10.4f} {'-':>8s} {'-':>13s}")


if __name__ == "__main__":
    main()
