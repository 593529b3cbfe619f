import math

import numpy as np
import pytest

from conftest import interior_density, make_random_chain
from pmeflow import chain as C
from pmeflow import entropy as E
from pmeflow.chain import gradient, rho_hat
from pmeflow.errors import BoundaryEvaluation, ExponentOutOfRange
from pmeflow.weights import theta_from_pair


class TestEntropyValue:
    def test_heat_at_uniform(self, two_point_sym):
        assert E.entropy_value(two_point_sym, E.heat_pair(), np.ones(2)) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_renyi2_at_uniform(self, cycle6):
        assert E.entropy_value(cycle6, E.renyi_pair(2.0), np.ones(6)) == pytest.approx(
            1.0, abs=1e-14
        )

    def test_renyi2_two_point(self, two_point_sym):
        got = E.entropy_value(two_point_sym, E.renyi_pair(2.0), np.array([1.5, 0.5]))
        assert got == pytest.approx(1.25, abs=1e-14)  # 9/4 * 1/2 + 1/4 * 1/2

    def test_heat_boundary_ok(self, two_point_sym):
        # r log r extends continuously by 0
        got = E.entropy_value(two_point_sym, E.heat_pair(), np.array([2.0, 0.0]))
        assert got == pytest.approx(math.log(2.0), abs=1e-14)

    def test_strict_convexity_midpoint(self):
        ch, rng = make_random_chain(21, n=5)
        pair = E.renyi_pair(1.5)
        r0 = interior_density(ch, rng)
        r1 = interior_density(ch, rng)
        mid = E.entropy_value(ch, pair, 0.5 * (r0 + r1))
        avg = 0.5 * (E.entropy_value(ch, pair, r0) + E.entropy_value(ch, pair, r1))
        assert mid < avg


class TestDissipation:
    def test_zero_at_uniform(self, cycle6):
        assert E.dissipation(cycle6, E.renyi_pair(2.0), np.ones(6)) == pytest.approx(
            0.0, abs=1e-14
        )

    def test_two_point_renyi2(self, two_point_sym):
        got = E.dissipation(two_point_sym, E.renyi_pair(2.0), np.array([1.5, 0.5]))
        assert got == pytest.approx(2.0, abs=1e-14)  # hand-expanded four-term sum

    def test_heat_boundary_infinite(self, two_point_sym):
        assert E.dissipation(two_point_sym, E.heat_pair(), np.array([2.0, 0.0])) == math.inf

    def test_renyi_large_m_boundary_finite(self, two_point_sym):
        got = E.dissipation(two_point_sym, E.renyi_pair(2.0), np.array([2.0, 0.0]))
        assert math.isfinite(got) and got > 0.0

    def test_positive_away_from_uniform(self):
        ch, rng = make_random_chain(33, n=6)
        rho = interior_density(ch, rng)
        assert E.dissipation(ch, E.heat_pair(), rho) > 1e-8


class TestEntropyGradient:
    def test_zero_at_uniform(self, cycle6):
        g = E.entropy_gradient(cycle6, E.heat_pair(), np.ones(6))
        assert np.abs(g).max() < 1e-14

    def test_renyi2_closed_form(self):
        ch, rng = make_random_chain(2, n=5)
        rho = interior_density(ch, rng)
        g = E.entropy_gradient(ch, E.renyi_pair(2.0), rho)
        expected = 2.0 * (rho[None, :] - rho[:, None])
        np.testing.assert_allclose(g, expected, atol=1e-13)

    @pytest.mark.parametrize("m", [0.5, 1.0, 1.5, 2.0])
    def test_weighted_gradient_identity(self, m):
        # rhohat * grad f'(rho) = grad phi(rho) for the induced weight
        ch, rng = make_random_chain(17, n=6)
        pair = E.renyi_pair(m)
        theta = theta_from_pair(pair)
        rho = interior_density(ch, rng)
        lhs = rho_hat(ch, theta, rho) * E.entropy_gradient(ch, pair, rho)
        rhs = np.where(ch.support, gradient(np.asarray(pair.phi(rho))), 0.0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_boundary_rejected(self, two_point_sym):
        with pytest.raises(BoundaryEvaluation):
            E.entropy_gradient(two_point_sym, E.heat_pair(), np.array([2.0, 0.0]))


class TestPairConstructors:
    def test_renyi_one_routes_to_heat(self):
        assert E.renyi_pair(1.0).kind == "heat"

    @pytest.mark.parametrize("m", [0.0, -0.5, 2.1])
    def test_renyi_range(self, m):
        with pytest.raises(ExponentOutOfRange):
            E.renyi_pair(m)

    def test_hilbertian_consistency(self):
        pair = E.hilbertian_pair("power", 1.5)
        grid = np.logspace(-3, 3, 64)
        np.testing.assert_allclose(pair.df(grid), pair.phi(grid), atol=1e-12)

    def test_boundary_derivative_values(self):
        # continuous extensions at r = 0: f''(0) = 2 for the quadratic pair,
        # f'(0) finite iff m > 1
        pair = E.renyi_pair(2.0)
        np.testing.assert_allclose(pair.d2f(np.array([0.0, 1.0])), [2.0, 2.0])
        assert float(pair.df(np.array([0.0]))[0]) == 0.0
        assert np.isposinf(E.renyi_pair(0.5).d2f(np.array([0.0]))[0])

    def test_from_name(self):
        assert E.pair_from_name("heat").kind == "heat"
        assert E.pair_from_name("renyi:1.5").m == 1.5
        assert E.pair_from_name("hilbertian:identity").kind == "hilbertian"
        assert E.pair_from_name("hilbertian:power:2").m == 2.0
        with pytest.raises(ExponentOutOfRange):
            E.pair_from_name("entropy-of-doom")
