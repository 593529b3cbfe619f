#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times one action cost/gradient evaluation (the inner loop of the distance
solver) and one expanded Hessian triple sum, on a small desk-scale problem
and a larger one, plus an end-to-end distance solve per backend.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from pmeflow import kernels
from pmeflow.chain import random_reversible_chain
from pmeflow.metric import distance
from pmeflow.torus import build_torus, discretize, CircleDensity
from pmeflow.weights import theta_power


def time_call(fn, repeat=5, number=20):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def bench_bb(impl, chain, n_time_steps, m=1.5, seed=0):
    rng = np.random.default_rng(seed)
    n, E = chain.n, chain.n_edges
    V = 0.1 * rng.standard_normal((n_time_steps, E))
    rho = 0.5 + rng.uniform(0.0, 1.0, size=(n_time_steps + 1, n))
    gV = np.zeros_like(V)
    gRho = np.zeros_like(rho)
    dt = 1.0 / n_time_steps

    def run():
        impl.bb_cost_grad_power(V, rho, chain.edge_w, chain.edge_u, chain.edge_v, dt, m, gV, gRho)

    return time_call(run)


def bench_bform(impl, chain, seed=0):
    rng = np.random.default_rng(seed)
    n = chain.n
    psi = rng.standard_normal(n)
    rho = 0.5 + rng.uniform(0.0, 1.0, size=n)
    rx = np.broadcast_to(rho[:, None], (n, n))
    ry = np.broadcast_to(rho[None, :], (n, n))
    th, d1, d2 = theta_power(1.5).value_d1_d2(rx, ry)
    z = np.zeros_like(th)
    args = tuple(
        np.ascontiguousarray(a)
        for a in (
            psi, chain.q, chain.pi, rho**1.5, 1.5 * rho**0.5,
            np.where(chain.support, th, z),
            np.where(chain.support, d1, z),
            np.where(chain.support, d2, z),
        )
    )

    def run():
        impl.bform_triple(*args)

    return time_call(run)


def bench_distance(n_side=16, n_steps=24):
    torus = build_torus(n_side, 1)
    r0 = discretize(CircleDensity((0.6,)), n_side)
    r1 = discretize(CircleDensity((-0.3, 0.25)), n_side)
    t0 = time.perf_counter()
    value, path = distance(torus.chain, theta_power(2.0), r0, r1, n_steps)
    return time.perf_counter() - t0, value, path.iterations


def main():
    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}")
    print(f"available: {', '.join(backends)}")
    print()

    rng = np.random.default_rng(1)
    small = random_reversible_chain(8, rng)
    big = build_torus(32, 1).chain

    rows = []
    for label, chain, K in (("n=8, K=16", small, 16), ("torus N=32, K=32", big, 32)):
        row = {"problem": f"action cost+grad ({label})"}
        for name, impl in backends.items():
            row[name] = bench_bb(impl, chain, K)
        rows.append(row)
    for label, chain in (("n=8", small), ("n=24", random_reversible_chain(24, rng))):
        row = {"problem": f"Hessian triple sum ({label})"}
        for name, impl in backends.items():
            row[name] = bench_bform(impl, chain)
        rows.append(row)

    names = list(backends)
    header = f"{'kernel':<36}" + "".join(f"{n:>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for row in rows:
        line = f"{row['problem']:<36}"
        for n in names:
            line += f"{row[n] * 1e6:>12.1f}us"
        if len(names) == 2:
            line += f"{row['python'] / row['cython']:>9.1f}x"
        print(line)

    print()
    wall, value, iters = bench_distance()
    print(
        f"end-to-end distance (torus N=16, K=24, m=2, backend={kernels.BACKEND}): "
        f"{wall:.2f}s, value={value:.6f}, iterations={iters}"
    )
    print("(set PMEFLOW_PURE=1 to force the numpy backend)")


if __name__ == "__main__":
    main()
