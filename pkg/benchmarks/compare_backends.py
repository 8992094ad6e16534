#!/usr/bin/env python3
"""Benchmark the compiled kernel against the NumPy reference implementation.

Two measurements:

* a micro-benchmark of the advection right-hand side on several mesh sizes,
  calling both backends in-process;
* an end-to-end 20000-step filtered box run, executed twice in subprocesses
  (``RKSTAB_PURE_PYTHON=1`` forces the reference backend, since the backend is
  chosen once at import).

Usage: python3 benchmarks/compare_backends.py [--steps N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from rkstab.advection import Mesh1D, build_semidiscretization
from rkstab.kernels import _reference, available_backends


def time_callable(fn, args, min_seconds=0.2):
    """Return seconds per call, measured over at least min_seconds."""
    fn(*args)  # warm up
    calls = 1
    while True:
        start = time.perf_counter()
        for _ in range(calls):
            fn(*args)
        elapsed = time.perf_counter() - start
        if elapsed >= min_seconds:
            return elapsed / calls
        calls *= 4


def micro_benchmark():
    backends = available_backends()
    print("backends available:", ", ".join(sorted(backends)))
    print()
    print(f"{'mesh':>12} {'reference':>12}", end="")
    if "cython" in backends:
        print(f" {'cython':>12} {'speedup':>8}")
    else:
        print()
    rng = np.random.default_rng(0)
    for n_elements, degree in [(8, 9), (32, 15), (128, 9), (512, 4)]:
        disc = build_semidiscretization(Mesh1D(-1.0, 1.0, n_elements), degree)
        u = np.ascontiguousarray(rng.standard_normal((n_elements, degree + 1)))
        args = (u, disc._gmat, disc._trace_left, disc._trace_right, disc._lift)
        slow = time_callable(_reference.advection_rhs, args)
        label = f"{n_elements}x{degree}"
        print(f"{label:>12} {slow * 1e6:>10.2f}us", end="")
        if "cython" in backends:
            fast = time_callable(backends["cython"].advection_rhs, args)
            print(f" {fast * 1e6:>10.2f}us {slow / fast:>7.2f}x")
        else:
            print()


_CHILD_CODE = """
import time
from rkstab import kernels
from rkstab.timeloop import SimulationConfig, run_simulation

config = SimulationConfig(
    method="explicit_euler",
    filter_mode="filter",
    steps={steps},
    t_final=4.0,
    initial_condition="box",
    n_elements=8,
    degree=9,
)
start = time.perf_counter()
run_simulation(config)
print(kernels.BACKEND, time.perf_counter() - start)
"""


def end_to_end(steps: int):
    print()
    print(f"end-to-end: {steps}-step filtered box run (degree 9, 8 elements)")
    results = {}
    for forced, label in ((None, "selected"), ("1", "reference")):
        env = dict(os.environ)
        env.pop("RKSTAB_PURE_PYTHON", None)
        if forced is not None:
            env["RKSTAB_PURE_PYTHON"] = forced
        output = subprocess.run(
            [sys.executable, "-c", _CHILD_CODE.format(steps=steps)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        ).stdout.split()
        backend, seconds = output[0], float(output[1])
        results[label] = (backend, seconds)
        print(f"  {label:>9} backend ({backend}): {seconds:.2f}s")
    selected_backend, selected_time = results["selected"]
    _, reference_time = results["reference"]
    if selected_backend != "reference":
        print(f"  whole-run speedup: {reference_time / selected_time:.2f}x")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20000)
    args = parser.parse_args()
    micro_benchmark()
    end_to_end(args.steps)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
