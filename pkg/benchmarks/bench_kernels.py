#!/usr/bin/env python3
"""Benchmark the compiled ADI kernels against the pure NumPy/SciPy fallback.

Runs identical propagation workloads through both backends and reports
per-step wall time plus the maximum deviation between the two results.

    python benchmarks/bench_kernels.py [--steps N]
"""

import argparse
import time

import numpy as np

from tunnelkit import kernels
from tunnelkit.grids import CylGrid, gaussian_seed
from tunnelkit.potentials import Potential
from tunnelkit.propagator import Stepper
from tunnelkit.pulse import LaserPulse

CASES = [
    ("small  (201 x  60)", CylGrid(-20.0, 20.0, 201, 12.0, 60)),
    ("smoke  (801 x 150)", CylGrid(-60.0, 60.0, 801, 30.0, 150)),
    ("desk  (2001 x 225)", CylGrid(-150.0, 150.0, 2001, 45.0, 225)),
]


def time_backend(grid, backend, steps, dt=0.02):
    pot = Potential("soft_core", Z=2.0, a=1.0)
    pulse = LaserPulse(E0=0.14, omega=0.2)
    st = Stepper(grid, pot, pulse, dt, backend=backend)
    psi = gaussian_seed(grid).psi
    for k in range(3):
        st.advance(psi, k * dt)
    t0 = time.perf_counter()
    for k in range(steps):
        st.advance(psi, k * dt)
    elapsed = (time.perf_counter() - t0) / steps
    return elapsed, psi


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=30)
    args = ap.parse_args()

    backends = ["numpy"] + (["cython"] if kernels.HAVE_EXT else [])
    if not kernels.HAVE_EXT:
        print("compiled backend not built; benchmarking the fallback only")
    print(f"{'grid':<20} {'backend':<8} {'ms/step':>10} {'speedup':>9} {'max |diff|':>12}")
    for label, grid in CASES:
        base_time = None
        base_psi = None
        for backend in backends:
            elapsed, psi = time_backend(grid, backend, args.steps)
            if backend == "numpy":
                base_time, base_psi = elapsed, psi
                speedup, diff = 1.0, 0.0
            else:
                speedup = base_time / elapsed
                diff = float(np.abs(psi - base_psi).max())
            print(f"{label:<20} {backend:<8} {elapsed * 1e3:>10.2f} "
                  f"{speedup:>8.2f}x {diff:>12.3e}")


if __name__ == "__main__":
    main()
