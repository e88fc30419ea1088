"""Time the compiled kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--cells 15680] [--steps 500]

Compilation is excluded: each numba kernel is called once before timing.
The last column is numpy time over numba time.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from oectsim import kernels


def synapse_state(rng, size):
    g_min = 1e-7 * np.exp(0.05 * rng.standard_normal(size))
    g_max = 1e-5 * np.exp(0.05 * rng.standard_normal(size))
    g = g_min + rng.random(size) * (g_max - g_min)
    return [g, g.copy(), np.zeros(size, np.int8), np.zeros(size), g.copy(), np.ones(size),
            np.zeros(size), g_min, g_max, np.full(size, 0.2), np.full(size, 1.63)]


def bench_apply_writes(backend, rng, cells):
    f = kernels.get("apply_writes", backend)
    state = synapse_state(rng, cells)
    d = rng.choice(np.array([-1, 0, 1], np.int8), cells)
    m = rng.random(cells) * 5
    z1, z2 = rng.standard_normal(cells), rng.standard_normal(cells)
    return lambda: f(*state, 1023.0, 0.05, 0.005, d, m, z1, z2)


def bench_verify_iteration(backend, rng, cells):
    f = kernels.get("verify_iteration", backend)
    state = synapse_state(rng, cells)
    target = state[7] + rng.random(cells) * (state[8] - state[7])
    tol = (state[8] - state[7]) / 2048
    budget = np.full(cells, 1e9)
    z = rng.standard_normal((3, cells))

    def call():
        # fresh state each call so every cell is still unconverged
        s = [a.copy() for a in state]
        used, active, conv = np.zeros(cells), np.ones(cells, bool), np.zeros(cells, bool)
        f(*s, 1023.0, 0.05, 0.005, target, tol, used, budget, active, conv, 2e-4, True,
          z[0], z[1], z[2])
    return call


def bench_receptor_chain(backend, rng, steps, nodes=12):
    f = kernels.get("receptor_chain", backend)
    u, x0 = rng.random((steps, nodes)), rng.random(nodes)
    a_on, a_off = rng.random(nodes), rng.random(nodes)
    return lambda: f(u, x0, a_on, a_off)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--cells", type=int, default=784 * 20, help="cells per write call")
    ap.add_argument("--steps", type=int, default=500, help="receptor time steps")
    args = ap.parse_args(argv)

    cases = {
        "apply_writes": lambda b, r: bench_apply_writes(b, r, args.cells),
        "verify_iteration": lambda b, r: bench_verify_iteration(b, r, args.cells),
        "receptor_chain": lambda b, r: bench_receptor_chain(b, r, args.steps),
    }
    print(f"{'kernel':18s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, make in cases.items():
        times = {}
        for backend in ("numpy", "numba"):
            fn = make(backend, np.random.default_rng(0))
            fn()  # warm-up / JIT
            number = 10
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            times[backend] = 1e3 * best
        print(f"{name:18s} {times['numpy']:10.3f} {times['numba']:10.3f} "
              f"{times['numpy'] / times['numba']:8.1f}")


if __name__ == "__main__":
    main()
