"""Time the RK4 spin-chain kernel under the numba and numpy backends.

    python benchmarks/bench_integrator.py [--t-end 10] [--dt 1e-3] [--repeat 3]

The numba timing excludes the first (compiling) call. Both backends are also
checked against each other on the final state.
"""
import argparse
import time

import numpy as np

from coadjoint import _kernels
from coadjoint.spinchain import SpinChainConfig, integrate, random_state


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="2,3,4,8")
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; timing numpy only")
    steps = int(round(args.t_end / args.dt))
    print(f"{'n':>3} {'steps':>7} " + " ".join(f"{b + ' [s]':>12}" for b in backends)
          + f" {'speedup':>8} {'max diff':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        rng = np.random.default_rng(n)
        cfg = SpinChainConfig.from_levels(rng.uniform(0.5, 1.5, n), np.sort(rng.uniform(0.3, 1.6, n - 1)))
        Z0 = random_state(cfg, n)
        run = {b: (lambda b=b: integrate(cfg, Z0, args.t_end, args.dt, record_every=100, backend=b))
               for b in backends}
        if "numba" in run:
            integrate(cfg, Z0, 10 * args.dt, args.dt, backend="numba")  # compile
        res = {b: best_time(run[b], args.repeat) for b in backends}
        row = f"{n:>3} {steps:>7} " + " ".join(f"{res[b][0]:>12.4f}" for b in backends)
        if "numba" in res:
            speedup = res["numpy"][0] / res["numba"][0]
            diff = np.abs(res["numpy"][1].states[-1] - res["numba"][1].states[-1]).max()
            row += f" {speedup:>7.1f}x {diff:>10.1e}"
        print(row)


if __name__ == "__main__":
    main()
