"""Time the compiled kernels against the numpy fallback on end-to-end workloads.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each workload
runs once per backend (best of ``N``); outputs are compared for equality.
"""
import argparse
import time

import numpy as np

from barrier_wave import _backend, _pykernels, limit, nlw, ode
from barrier_wave.geometry import Diamond, NullLattice
from barrier_wave.linear import example13_data, smalldata_data

MODULES = (limit, nlw, ode)


def use_backend(k):
    for m in MODULES:
        m.kernels = k


def limit_march():
    state, _ = limit.construct_limit(example13_data(), NullLattice(Diamond(4.0, 4.0, 6.0), 1537))
    return state.phi


def solver():
    field, _ = nlw.solve_on_diamond(smalldata_data(), 63.0, Diamond(1.0, 1.0, 2.0), 65,
                                    1 / 504, 0.5)
    return field.values


def ode_verlet():
    return ode.integrate_ode(400.0, 0.0, 1.0, 10.0, 1e-4).phi


WORKLOADS = {"limit march (1537^2 nodes)": limit_march,
             "leapfrog solver (p=63)": solver,
             "Verlet ODE (1e5 steps)": ode_verlet}


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    ck = _backend.compiled_kernels
    if ck is None:
        raise SystemExit("compiled kernels are not built; reinstall without BARRIER_WAVE_NO_EXT")
    print(f"{'workload':<30}{'compiled s':>12}{'numpy s':>12}{'speedup':>10}  identical")
    try:
        for name, fn in WORKLOADS.items():
            use_backend(ck)
            tc, oc = best_time(fn, args.repeat)
            use_backend(_pykernels)
            tp, op = best_time(fn, args.repeat)
            same = np.array_equal(oc, op, equal_nan=True)
            print(f"{name:<30}{tc:>12.3f}{tp:>12.3f}{tp / tc:>10.1f}  {same}")
    finally:
        use_backend(_backend.kernels)


if __name__ == "__main__":
    main()
