"""Steps per second of the compiled and pure-Python steppers.

    python3 benchmarks/bench_kernel.py [--steps N] [--repeat R]

Both kernels advance the same state with the same noise and are checked
for bitwise agreement before timing.
"""
import argparse
import math
import time

import numpy as np

from spinmech.sim import _pykernel

W0 = 2 * math.pi * 1e3
# dt, w0^2, OU decay, noise scale, torque per rho11, G, Delta, Omega, Gamma2, gamma_las, model
PARAMS = {
    "off": [2e-8, W0**2, 0.9999, 1e-6, 0.0, 3e7, -1e6, 0.0, 1.2e6, 3e3, 0.0],
    "adiabatic": [2e-8, W0**2, 0.9999, 1e-6, -1e-3, 3e7, -1e6, 2e6, 1.2e6, 3e3, 1.0],
    "full-bloch": [2e-8, W0**2, 0.9999, 1e-6, -1e-3, 3e7, -1e6, 2e6, 1.2e6, 3e3, 2.0],
}


def run(fn, p, noise, stride=10):
    state = np.array([1e-4, 0.0, 0.2, 0.01, -0.02])
    out = np.zeros((len(noise) // stride, 5))
    t0 = time.perf_counter()
    fn(state, p, noise, stride, 0, out, 0)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        from spinmech.sim import _kernel
    except ImportError:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    noise = np.random.default_rng(0).standard_normal(args.steps)
    print(f"{'model':<11} {'cython steps/s':>15} {'python steps/s':>15} {'speed-up':>9}  identical")
    for name, p in PARAMS.items():
        p = np.array(p)
        tc = min(run(_kernel.step_block, p, noise)[0] for _ in range(args.repeat))
        tp = min(run(_pykernel.step_block, p, noise)[0] for _ in range(max(1, args.repeat // 3)))
        same = np.array_equal(run(_kernel.step_block, p, noise)[1],
                              run(_pykernel.step_block, p, noise)[1])
        print(f"{name:<11} {args.steps / tc:>15.3g} {args.steps / tp:>15.3g} {tp / tc:>9.0f}  {same}")


if __name__ == "__main__":
    main()
