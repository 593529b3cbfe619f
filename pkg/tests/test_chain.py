import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import interior_density, make_random_chain
from pmeflow import chain as C
from pmeflow.errors import InvalidDensity, NotAQMatrix, NotIrreducible, NotReversible
from pmeflow.weights import theta_log, theta_power


class TestBuildChain:
    def test_two_point_stationary(self):
        ch = C.two_point_chain(1.0, 2.0)
        np.testing.assert_allclose(ch.pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_symmetric_cycle_uniform(self):
        ch = C.cycle_chain(3, 1.0)
        np.testing.assert_allclose(ch.pi, np.full(3, 1.0 / 3.0), atol=1e-12)

    def test_positive_row_sum_rejected(self):
        with pytest.raises(NotAQMatrix):
            C.build_chain([[-1.0, 1.5], [1.0, -1.0]])

    def test_negative_rate_rejected(self):
        with pytest.raises(NotAQMatrix):
            C.build_chain([[1.0, -1.0], [1.0, -1.0]])

    def test_reducible_rejected(self):
        q = np.zeros((4, 4))
        q[0, 1] = q[1, 0] = 1.0
        q[2, 3] = q[3, 2] = 1.0
        np.fill_diagonal(q, -q.sum(axis=1))
        with pytest.raises(NotIrreducible):
            C.build_chain(q)

    def test_non_reversible_rejected(self):
        # directed 3-cycle: uniform stationary measure but no detailed balance
        q = np.array([[-2.0, 2.0, 0.0], [0.0, -2.0, 2.0], [2.0, 0.0, -2.0]])
        q += np.array([[-1.0, 0.0, 1.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
        with pytest.raises(NotReversible):
            C.build_chain(q)

    def test_user_pi_cross_checked(self):
        with pytest.raises(NotReversible):
            C.build_chain([[-1.0, 1.0], [2.0, -2.0]], pi=[0.5, 0.5])

    def test_edge_weights_symmetric(self):
        ch, _ = make_random_chain(7, n=6)
        w_rev = ch.q[ch.edge_v, ch.edge_u] * ch.pi[ch.edge_v]
        np.testing.assert_allclose(ch.edge_w, w_rev, rtol=1e-12)


class TestChainText:
    def test_round_trip(self):
        text = "n = 2\nQ = [[-1, 1], [2, -2]]\n"
        ch = C.chain_from_text(text)
        np.testing.assert_allclose(ch.pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_unknown_field(self):
        with pytest.raises(NotAQMatrix):
            C.chain_from_text("Q = [[-1,1],[1,-1]]\nfoo = 3\n")

    def test_shape_mismatch(self):
        with pytest.raises(NotAQMatrix):
            C.chain_from_text("n = 3\nQ = [[-1,1],[1,-1]]\n")

    def test_error_code(self):
        try:
            C.chain_from_text("Q = [[-1, 2], [1, -1]]\n")
        except NotAQMatrix as exc:
            assert exc.code == "NotAQMatrix"
        else:  # pragma: no cover
            pytest.fail("expected NotAQMatrix")


class TestCalculus:
    def test_laplacian_constant(self, cycle6):
        assert np.abs(C.laplacian(cycle6, np.ones(6))).max() < 1e-14

    def test_laplacian_two_point(self, two_point_sym):
        np.testing.assert_allclose(
            C.laplacian(two_point_sym, np.array([0.0, 1.0])), [1.0, -1.0], atol=1e-14
        )

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_laplacian_pi_mean_zero(self, seed):
        ch, rng = make_random_chain(seed % 100, n=4 + seed % 5)
        psi = rng.standard_normal(ch.n)
        assert abs(float(ch.pi @ C.laplacian(ch, psi))) < 1e-12

    def test_gradient_constant(self):
        assert np.abs(C.gradient(np.full(5, 3.7))).max() == 0.0

    def test_divergence_of_symmetric_zero(self, cycle6):
        rng = np.random.default_rng(0)
        sym = rng.standard_normal((6, 6))
        sym = sym + sym.T
        assert np.abs(C.divergence(cycle6, sym)).max() < 1e-14

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_integration_by_parts(self, seed):
        n = 5 + seed % 8  # up to 12 states
        ch, rng = make_random_chain(seed % 1000, n=n)
        psi = rng.standard_normal(n)
        big_psi = rng.standard_normal((n, n))
        lhs = C.ip_edge(ch, C.gradient(psi), big_psi)
        rhs = -C.ip_vertex(ch, psi, C.divergence(ch, big_psi))
        assert abs(lhs - rhs) < 1e-12 * (1.0 + abs(lhs))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10**6))
    def test_laplacian_self_adjoint(self, seed):
        ch, rng = make_random_chain(seed % 997, n=6)
        phi = rng.standard_normal(6)
        psi = rng.standard_normal(6)
        lhs = C.ip_vertex(ch, C.laplacian(ch, phi), psi)
        rhs = C.ip_vertex(ch, phi, C.laplacian(ch, psi))
        assert abs(lhs - rhs) < 1e-12 * (1.0 + abs(lhs))

    def test_laplacian_equals_div_grad(self):
        ch, rng = make_random_chain(11, n=7)
        psi = rng.standard_normal(7)
        np.testing.assert_allclose(
            C.divergence(ch, C.gradient(psi)), C.laplacian(ch, psi), atol=1e-12
        )

    def test_spectrum(self):
        ch, _ = make_random_chain(3, n=8)
        vals, vecs = np.linalg.eig(ch.q)
        assert vals.real.max() < 1e-10
        zero = np.abs(vals) < 1e-10
        assert zero.sum() == 1
        v = vecs[:, zero].ravel().real
        assert np.abs(v / v[0] - 1.0).max() < 1e-8


class TestInnerRho:
    def test_constant_potential_vanishes(self, cycle6):
        g = C.gradient(np.ones(6))
        assert C.inner_rho(cycle6, theta_log(), np.ones(6), g, g) == 0.0

    def test_uniform_density_reduces_to_pi(self):
        ch, rng = make_random_chain(5, n=6)
        a = rng.standard_normal((6, 6))
        b = rng.standard_normal((6, 6))
        lhs = C.inner_rho(ch, theta_log(), np.ones(6), a, b)
        rhs = C.ip_edge(ch, a, b)
        assert abs(lhs - rhs) < 1e-12 * (1.0 + abs(rhs))

    def test_two_point_closed_form(self):
        # ||grad psi||^2_rho = pq/(p+q) theta(rho_a, rho_b) (psi_a - psi_b)^2
        p, q = 1.0, 2.0
        ch = C.two_point_chain(p, q)
        theta = theta_power(0.5)
        rho = np.array([0.6, 1.8])
        psi = np.array([0.9, -0.4])
        g = C.gradient(psi)
        lhs = C.inner_rho(ch, theta, rho, g, g)
        rhs = p * q / (p + q) * theta.value(rho[0], rho[1]) * (psi[0] - psi[1]) ** 2
        assert abs(lhs - rhs) < 1e-14


class TestDensity:
    def test_mass_checked(self, two_point_sym):
        with pytest.raises(InvalidDensity):
            C.density(two_point_sym, [1.0, 0.5])

    def test_negative_checked(self, two_point_sym):
        with pytest.raises(InvalidDensity):
            C.density(two_point_sym, [2.2, -0.2])

    def test_normalize(self, two_point_sym):
        d = C.density(two_point_sym, [3.0, 1.0], normalize=True)
        assert abs(float(d.values @ two_point_sym.pi) - 1.0) < 1e-14
        assert d.is_interior

    def test_uniform(self, cycle6):
        assert np.all(C.uniform_density(cycle6).values == 1.0)


class TestPoisson:
    def test_solves_laplace_equation(self):
        ch, rng = make_random_chain(9, n=7)
        rho = interior_density(ch, rng)
        rhs = rho - 1.0
        rhs -= float(ch.pi @ rhs)
        u = ch.poisson_solve(rhs)
        np.testing.assert_allclose(C.laplacian(ch, u), rhs, atol=1e-11)
        assert abs(float(ch.pi @ u)) < 1e-12
