"""Backend agreement and gradient correctness for the hot kernels."""

import numpy as np
import pytest

from conftest import interior_density, make_random_chain
from pmeflow import kernels
from pmeflow.weights import power_theta_with_derivs, theta_power


def _problem(seed=0, n=5, K=6):
    ch, rng = make_random_chain(seed, n=n)
    E = ch.n_edges
    V = 0.3 * rng.standard_normal((K, E))
    rho = np.empty((K + 1, n))
    for k in range(K + 1):
        rho[k] = interior_density(ch, rng, floor=0.1)
    return ch, V, rho, rng


def _call(impl, mode, ch, V, rho, dt, m):
    K, E = V.shape
    n = rho.shape[1]
    gV = np.zeros((K, E))
    gRho = np.zeros((K + 1, n))
    if mode == "power":
        cost = impl.bb_cost_grad_power(V, rho, ch.edge_w, ch.edge_u, ch.edge_v, dt, m, gV, gRho)
    else:
        rbar = 0.5 * (rho[:-1] + rho[1:])
        th, d1, d2 = power_theta_with_derivs(m, rbar[:, ch.edge_u], rbar[:, ch.edge_v])
        cost = impl.bb_cost_grad_generic(
            V,
            np.ascontiguousarray(th),
            np.ascontiguousarray(d1),
            np.ascontiguousarray(d2),
            ch.edge_w, ch.edge_u, ch.edge_v, dt, gV, gRho,
        )
    return cost, gV, gRho


class TestBackendAgreement:
    @pytest.mark.parametrize("m", [0.5, 1.0, 1.5, 2.0])
    @pytest.mark.parametrize("mode", ["power", "generic"])
    def test_cost_and_gradients_match(self, m, mode):
        backends = kernels.available_backends()
        if len(backends) < 2:
            pytest.skip("compiled extension not built")
        ch, V, rho, _ = _problem(seed=int(m * 4), n=5, K=6)
        results = {
            name: _call(impl, mode, ch, V, rho, 1.0 / 6.0, m)
            for name, impl in backends.items()
        }
        c_py, gv_py, gr_py = results["python"]
        c_cy, gv_cy, gr_cy = results["cython"]
        assert c_cy == pytest.approx(c_py, rel=1e-12)
        np.testing.assert_allclose(gv_cy, gv_py, rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(gr_cy, gr_py, rtol=1e-11, atol=1e-13)

    def test_bform_agreement(self):
        backends = kernels.available_backends()
        if len(backends) < 2:
            pytest.skip("compiled extension not built")
        ch, rng = make_random_chain(9, n=6)
        theta = theta_power(1.5)
        rho = interior_density(ch, rng)
        psi = rng.standard_normal(6)
        rx = np.broadcast_to(rho[:, None], (6, 6))
        ry = np.broadcast_to(rho[None, :], (6, 6))
        th, d1, d2 = theta.value_d1_d2(rx, ry)
        z = np.zeros_like(th)
        args = (
            np.ascontiguousarray(psi),
            np.ascontiguousarray(ch.q),
            np.ascontiguousarray(ch.pi),
            np.ascontiguousarray(rho**1.5),
            np.ascontiguousarray(1.5 * rho**0.5),
            np.ascontiguousarray(np.where(ch.support, th, z)),
            np.ascontiguousarray(np.where(ch.support, d1, z)),
            np.ascontiguousarray(np.where(ch.support, d2, z)),
        )
        vals = [impl.bform_triple(*args) for impl in backends.values()]
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)


class TestGradients:
    @pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
    def test_gradient_matches_finite_differences(self, m):
        impl = kernels.available_backends()["python"]
        ch, V, rho, rng = _problem(seed=8, n=4, K=5)
        dt = 0.2
        cost, gV, gRho = _call(impl, "power", ch, V, rho, dt, m)

        h = 1e-7
        for _ in range(5):
            k = rng.integers(V.shape[0])
            e = rng.integers(V.shape[1])
            vp = V.copy()
            vp[k, e] += h
            vm = V.copy()
            vm[k, e] -= h
            fd = (_call(impl, "power", ch, vp, rho, dt, m)[0]
                  - _call(impl, "power", ch, vm, rho, dt, m)[0]) / (2 * h)
            assert gV[k, e] == pytest.approx(fd, rel=1e-5, abs=1e-8)
        for _ in range(5):
            k = rng.integers(rho.shape[0])
            x = rng.integers(rho.shape[1])
            rp = rho.copy()
            rp[k, x] += h
            rm = rho.copy()
            rm[k, x] -= h
            fd = (_call(impl, "power", ch, V, rp, dt, m)[0]
                  - _call(impl, "power", ch, V, rm, dt, m)[0]) / (2 * h)
            assert gRho[k, x] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_vanishing_weight_conventions(self):
        # momentum across a dead edge costs +inf; no momentum costs nothing.
        # With m = 2 the weight vanishes only where both endpoint densities
        # do, so zeroing one edge's two nodes kills exactly that edge.
        impl = kernels.available_backends()["python"]
        ch, V, rho, _ = _problem(seed=3, n=4, K=5)
        dead = (ch.edge_u == ch.edge_u[0]) & (ch.edge_v == ch.edge_v[0])
        rho0 = rho.copy()
        rho0[:, ch.edge_u[0]] = 0.0
        rho0[:, ch.edge_v[0]] = 0.0
        cost, gV, gRho = _call(impl, "power", ch, V, rho0, 0.2, 2.0)
        assert cost == np.inf
        V0 = V.copy()
        V0[:, dead] = 0.0
        cost, gV, gRho = _call(impl, "power", ch, V0, rho0, 0.2, 2.0)
        assert np.isfinite(cost)
        assert np.all(gV[:, dead] == 0.0)
