"""Compare the compiled and NumPy RK4 backends on the 9-bus network.

    python3 benchmarks/bench_kernels.py [--batch 100] [--steps 5000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from kurasync import data, kernel
from kurasync.equilibrium import solve_power_flow


def setup(batch, seed=0):
    net = data.ieee9("ieee9_set1", seed=seed)
    eq = solve_power_flow(net, data.ieee9_p_o(), reference_node=8)
    th = eq.theta_o[net.tails] - eq.theta_o[net.heads]
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.uniform(-0.3, 0.3, (batch, net.n))
    P = np.zeros_like(X)
    return net, th, X, P


def time_backend(fn, net, th, X, P, steps, repeat):
    best = np.inf
    for _ in range(repeat):
        x = X.copy()
        t0 = time.perf_counter()
        fn(x, net.tails, net.heads, net.weights, th, 1.0 / net.d_array, P, 1e-3, steps, np.empty((0,) + x.shape))
        best = min(best, time.perf_counter() - t0)
    return best, x


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=100)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    net, th, X, P = setup(args.batch)
    work = args.batch * args.steps
    rows = []
    t_py, x_py = time_backend(kernel.python_rk4_advance, net, th, X, P, args.steps, args.repeat)
    rows.append(("python", t_py))
    if kernel.compiled_rk4_advance is not None:
        t_c, x_c = time_backend(kernel.compiled_rk4_advance, net, th, X, P, args.steps, args.repeat)
        rows.append(("cython", t_c))
        diff = float(np.max(np.abs(x_c - x_py)))
    else:
        diff = None
    print(f"batch={args.batch} steps={args.steps} (best of {args.repeat})")
    for name, t in rows:
        print(f"  {name:7s} {t:8.3f} s  {work / t / 1e6:7.2f} M state-steps/s")
    if len(rows) == 2:
        print(f"  speedup {t_py / rows[1][1]:.1f}x, max |difference| {diff:.3g}")
    else:
        print("  compiled backend not built")


if __name__ == "__main__":
    main()
