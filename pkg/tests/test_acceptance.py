"""Acceptance suite: each criterion at its stated tolerance, with the stated
runtime budget where one applies.  Prints one PASS/FAIL line per criterion
(visible with ``pytest tests/test_acceptance.py -v -s``)."""

import math
import time

import numpy as np

from conftest import interior_density, make_random_chain
from pmeflow import chain as C
from pmeflow import convexity as X
from pmeflow import entropy as E
from pmeflow import flow as F
from pmeflow import metric as M
from pmeflow import torus as T
from pmeflow.weights import (
    check_weight_properties,
    theta_log,
    theta_one,
    theta_power,
    theta_power_integral,
)


def report(idx, ok, detail, elapsed=None):
    status = "PASS" if ok else "FAIL"
    timing = f" [{elapsed:.2f}s]" if elapsed is not None else ""
    print(f"\nACCEPTANCE {idx:2d}: {status}{timing} {detail}")
    assert ok, f"criterion {idx}: {detail}"


def test_criterion_01_two_point_closed_form():
    t0 = time.perf_counter()
    got = X.two_point_kappa(1.0, 1.0, E.heat_pair()).value
    elapsed = time.perf_counter() - t0
    ok = abs(got - 2.0) <= 1e-6 and elapsed < 1.0
    report(1, ok, f"two-point kappa(heat, p=q=1) = {got:.9f}, target 2.0 +- 1e-6", elapsed)


def test_criterion_02_counterexample_reproduction():
    details = []
    ok = True
    t_all = time.perf_counter()
    for n in (6, 8, 10):
        t0 = time.perf_counter()
        r = X.circle_counterexample(n, 1.0, 1e-4)
        est = X.kappa_estimate(
            C.cycle_chain(n, 1.0), E.renyi_pair(2.0), theta_power(2.0), seed=0, starts=64
        )
        per_n = time.perf_counter() - t0
        ok_n = (
            abs(r.a_value - 1.0) <= 1e-3
            and abs(r.b_value + n / 2.0) <= 1e-3 * n
            and est.value <= -n / 2.0 + 0.05
            and per_n < 60.0
        )
        ok = ok and ok_n
        details.append(
            f"N={n}: A={r.a_value:.5f}, B={r.b_value:.5f}, kappa_est={est.value:.4f} [{per_n:.1f}s]"
        )
    report(2, ok, "; ".join(details), time.perf_counter() - t_all)


def test_criterion_03_hminus1_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        ch, rng = make_random_chain(300 + seed, n=3 + seed % 6)
        rho0 = rng.dirichlet(np.ones(ch.n)) / ch.pi
        rho1 = rng.dirichlet(np.ones(ch.n)) / ch.pi
        value, _ = M.distance(ch, theta_one(), rho0, rho1, 8)
        oracle = F.hminus1_distance(ch, rho0, rho1)
        worst = max(worst, abs(value - oracle) / (1.0 + oracle))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 300.0
    report(3, ok, f"20 random chains: max |W_one - H^-1| / (1 + H^-1) = {worst:.2e}", elapsed)


def test_criterion_04_monotonicity_in_m():
    t0 = time.perf_counter()
    ok = True
    worst = -math.inf
    for seed in range(10):
        ch, rng = make_random_chain(400 + seed, n=3 + seed % 5)
        rho0 = interior_density(ch, rng, floor=0.02)
        rho1 = interior_density(ch, rng, floor=0.02)
        values = {}
        for m in (0.5, 1.0, 2.0):
            values[m], _ = M.distance(ch, theta_power(m), rho0, rho1, 12)
        gap1 = values[1.0] - values[0.5]
        gap2 = values[2.0] - values[1.0]
        worst = max(worst, gap1, gap2)
        ok = ok and gap1 <= 2e-6 and gap2 <= 2e-6
    report(
        4, ok,
        f"10 instances, (m, m') in ((0.5, 1), (1, 2)): max W_m' - W_m = {worst:.2e} <= 2e-6",
        time.perf_counter() - t0,
    )


def test_criterion_05_gradient_flow_consistency():
    t0 = time.perf_counter()
    pair = E.renyi_pair(2.0)
    theta = theta_power(2.0)
    instances = [
        ("two-point", C.two_point_chain(1.0, 1.0), np.array([1.6, 0.4]), np.array([0.6, 1.4])),
        (
            "6-cycle",
            C.cycle_chain(6, 1.0),
            np.array([1.8, 1.3, 0.7, 0.4, 0.7, 1.1]),
            np.array([0.4, 0.7, 1.3, 1.9, 1.1, 0.6]),
        ),
    ]
    details = []
    ok = True
    for name, ch, rho0, sigma in instances:
        est = X.kappa_estimate(ch, pair, theta, seed=5, starts=32)
        kappa = min(0.0, est.value)
        traj = F.solve_pme(ch, pair, rho0, 0.8, samples=11, rtol=1e-10, atol=1e-12)
        dist = lambda a, b: M.distance(ch, theta, a, b, 16)[0]
        _, evi = F.evi_residual(ch, pair, dist, traj, sigma, kappa)
        fine = F.solve_pme(ch, pair, rho0, 0.8, samples=81, rtol=1e-10, atol=1e-12)
        _, diss = F.dissipation_identity_residual(fine)
        ok_i = evi.max() <= 1e-4 and diss.max() <= 1e-4
        ok = ok and ok_i
        details.append(
            f"{name}: kappa={kappa:.3f}, max EVI residual={evi.max():.2e}, "
            f"max |dF/dt + I| rel={diss.max():.2e}"
        )
    report(5, ok, "; ".join(details), time.perf_counter() - t0)


def test_criterion_06_hessian_identity():
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    h = 0.01
    for pair in (E.heat_pair(), E.renyi_pair(2.0)):
        from pmeflow.weights import theta_from_pair

        theta = theta_from_pair(pair)
        for i in range(10):
            ch, rng = make_random_chain(600 + 17 * i + (0 if pair.kind == "heat" else 1), n=3 + i % 4)
            rho = interior_density(ch, rng, floor=0.25)
            psi = 0.25 * rng.standard_normal(ch.n)
            b = X.hessian_form(ch, pair, theta, rho, psi)
            fwd = M.geodesic_shoot(ch, theta, rho, psi, 2 * h, samples=3)
            bwd = M.geodesic_shoot(ch, theta, rho, -psi, 2 * h, samples=3)
            f = [
                E.entropy_value(ch, pair, s)
                for s in (bwd.densities[2], bwd.densities[1], rho,
                          fwd.densities[1], fwd.densities[2])
            ]
            stencil = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
            rel = abs(b - stencil) / (1.0 + abs(b))
            worst = max(worst, rel)
            count += 1
    ok = worst <= 1e-4 and count == 20
    report(
        6, ok,
        f"{count} random (rho, psi), pairs heat and renyi:2: "
        f"max |B - d2F/dt2| / (1 + |B|) = {worst:.2e} <= 1e-4",
        time.perf_counter() - t0,
    )


def test_criterion_07_weight_function_properties():
    t0 = time.perf_counter()
    m_set = [0.25, 0.5, 1.0, 1.5, 2.0]
    grid = np.logspace(-3, 3, 13)
    rng = np.random.default_rng(7)
    ok = True
    details = []

    # homogeneity to 1e-12
    worst_h = 0.0
    for m in m_set:
        theta = theta_power(m)
        r, s = np.meshgrid(grid, grid, indexing="ij")
        for lam in (0.3, 2.0, 17.0):
            lhs = theta.value(lam * r, lam * s)
            rhs = lam * theta.value(r, s)
            worst_h = max(worst_h, float(np.abs(lhs - rhs).max() / max(1.0, rhs.max())))
    ok = ok and worst_h <= 1e-12
    details.append(f"homogeneity {worst_h:.1e}")

    # monotonicity in m on the grid
    prev = None
    mono_ok = True
    for m in m_set:
        cur = theta_power(m).value(*np.meshgrid(grid, grid, indexing="ij"))
        if prev is not None:
            mono_ok = mono_ok and float((cur - prev).min()) >= -1e-12 * float(cur.max())
        prev = cur
    ok = ok and mono_ok
    details.append(f"monotone in m: {mono_ok}")

    # boundary zero iff m <= 1
    bzero = all(theta_power(m).value(0.0, t) == 0.0 for m in (0.25, 0.5, 1.0) for t in grid)
    bpos = all(theta_power(m).value(0.0, 1.0) > 0.0 for m in (1.5, 2.0))
    ok = ok and bzero and bpos
    details.append(f"boundary zero (m<=1): {bzero}")

    # concavity: largest analytic Hessian eigenvalue on the grid
    worst_eig = -math.inf
    for m in m_set:
        rep = check_weight_properties(theta_power(m), grid)
        worst_eig = max(worst_eig, rep.max_hessian_eig)
    ok = ok and worst_eig <= 1e-8
    details.append(f"max Hessian eig {worst_eig:.1e} <= 1e-8")

    # integral representation matches the closed form to 1e-10
    worst_q = 0.0
    for m in m_set:
        theta = theta_power(m)
        for _ in range(8):
            r, s = np.exp(rng.uniform(-2, 2, size=2))
            quad = theta_power_integral(m, r, s, 64)
            worst_q = max(worst_q, abs(quad - theta.value(r, s)) / max(1.0, abs(quad)))
    ok = ok and worst_q <= 1e-10
    details.append(f"integral rep {worst_q:.1e} <= 1e-10")

    report(7, ok, "; ".join(details), time.perf_counter() - t0)


def test_criterion_08_gromov_hausdorff_trend():
    t0 = time.perf_counter()
    x = np.linspace(0.0, 1.0, 4096, endpoint=False)
    f = (1.0 + np.cos(2.0 * np.pi * x)) ** 4
    f /= f.mean()
    spectrum = np.fft.rfft(f) / len(x)
    coefs = tuple(float(c) * 0.99 for c in 2.0 * spectrum[1:5].real)
    shift = 0.35
    cos_c = tuple(a * math.cos(2 * math.pi * j * shift) for j, a in enumerate(coefs, start=1))
    sin_c = tuple(a * math.sin(2 * math.pi * j * shift) for j, a in enumerate(coefs, start=1))
    d0 = T.CircleDensity(coefs)
    d1 = T.CircleDensity(cos_c, sin_c)
    ok = True
    details = []
    for m in (1.0, 2.0):
        rows = T.gh_table(m, [8, 16, 32], (d0, d1), n_steps=24)
        gaps = [r.gap for r in rows]
        trend = gaps[1] <= 1.1 * gaps[0] and gaps[2] <= 1.1 * gaps[1]
        ok = ok and trend
        details.append(
            f"m={m:g}: gaps " + " > ".join(f"{g:.2e}" for g in gaps) + f" (trend: {trend})"
        )
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 600.0
    report(8, ok, "; ".join(details), elapsed)


def test_criterion_09_contraction():
    t0 = time.perf_counter()
    ch = C.two_point_chain(1.0, 1.0)
    ts, res = X.contraction_check(
        ch, E.heat_pair(), theta_log(),
        np.array([1.5, 0.5]), np.array([0.7, 1.3]), 2.0, [0.1, 0.5, 1.0], n_steps=16,
    )
    ok = bool(res.max() <= 1e-4)
    report(
        9, ok,
        "two-point heat, kappa = 2p: max W(rho_t, sigma_t) - e^(-2t) W_0 = "
        f"{res.max():.2e} <= 1e-4 at t in (0.1, 0.5, 1)",
        time.perf_counter() - t0,
    )


def test_criterion_10_fwi_edi():
    t0 = time.perf_counter()
    ch = C.two_point_chain(1.0, 1.0)
    pair = E.heat_pair()
    worst_fwi = -math.inf
    worst_edi = -math.inf
    for r in np.linspace(0.05, 1.95, 20):
        rho = np.array([r, 2.0 - r])
        worst_fwi = max(worst_fwi, X.check_fwi(ch, pair, theta_log(), rho, 2.0, n_steps=16))
        worst_edi = max(worst_edi, X.check_edi(ch, pair, rho, 2.0))
    ok = worst_fwi <= 1e-5 and worst_edi <= 1e-5
    report(
        10, ok,
        f"two-point heat, kappa = lambda = 2p, 20-point grid: "
        f"max FWI residual = {worst_fwi:.2e}, max EDI residual = {worst_edi:.2e} <= 1e-5",
        time.perf_counter() - t0,
    )
