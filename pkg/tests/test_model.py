import math

import numpy as np
import pytest

from ncpoa import model
from ncpoa.model import (
    ANY_RATE,
    AlphaFair,
    FlowAllocation,
    Linear,
    Scenario,
    SideLinks,
    inverse_marginal,
    linear_scenario,
    link_cost,
    link_price,
    marginal_utility,
    payoff,
    surplus,
    utility_value,
    validate_scenario,
)


class TestValidation:
    def test_valid_two_user(self):
        s = linear_scenario([1, 1], a=1, beta=0.5)
        assert validate_scenario(s) == []

    def test_zero_price_slope(self):
        s = linear_scenario([1, 1], a=0.0)
        assert any("a must be > 0" in v for v in validate_scenario(s))

    def test_beta_out_of_range(self):
        s = linear_scenario([1, 1], beta=1.5)
        assert any("beta must lie in (0,1]" in v for v in validate_scenario(s))

    def test_side_and_utility_violations_name_fields(self):
        s = Scenario((Linear(-1.0), AlphaFair(1.2)), a=1.0, beta=0.5,
                     side=SideLinks(0.0, 1.0))
        msgs = validate_scenario(s)
        assert any("side.a1" in v for v in msgs)
        assert any("utilities[0]" in v for v in msgs)
        assert any("utilities[1]" in v for v in msgs)

    def test_single_user_rejected(self):
        s = linear_scenario([1.0])
        assert any("n_users" in v for v in validate_scenario(s))


class TestUtilities:
    def test_alpha_fair_marginal_and_inverse(self):
        # alpha=1/2: marginal x^(-1/2), inverse m^(-2)
        u = AlphaFair(0.5)
        assert marginal_utility(u, 4.0) == pytest.approx(0.5)
        assert inverse_marginal(u, 2.0) == pytest.approx(0.25)

    def test_linear_value_and_marginal(self):
        u = Linear(3.0)
        assert utility_value(u, 2.0) == 6.0
        assert marginal_utility(u, 0.0) == 3.0
        assert marginal_utility(u, 17.3) == 3.0

    def test_alpha_fair_zero(self):
        assert utility_value(AlphaFair(0.5), 0.0) == 0.0

    def test_alpha_fair_marginal_unbounded_at_zero(self):
        assert marginal_utility(AlphaFair(0.3), 0.0) == math.inf

    def test_linear_inverse_marginal_three_way(self):
        u = Linear(2.0)
        assert inverse_marginal(u, 1.0) == math.inf
        assert inverse_marginal(u, 3.0) == 0.0
        assert inverse_marginal(u, 2.0) is ANY_RATE

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            utility_value(Linear(1.0), -0.1)
        with pytest.raises(ValueError):
            inverse_marginal(AlphaFair(0.5), 0.0)

    def test_monotone_increasing_and_concave(self):
        rng = np.random.default_rng(7)
        utilities = [Linear(2.5), AlphaFair(0.3), AlphaFair(0.8, 1.7)]
        for u in utilities:
            pts = np.sort(rng.uniform(0.0, 6.0, size=40))
            vals = [utility_value(u, t) for t in pts]
            margs = [marginal_utility(u, t) for t in pts]
            for lo, hi in zip(vals, vals[1:]):
                assert lo < hi
            for lo, hi in zip(margs, margs[1:]):
                assert lo >= hi - 1e-12

    def test_inverse_marginal_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            u = AlphaFair(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.5, 2.0)))
            x = float(rng.uniform(1e-3, 10.0))
            back = inverse_marginal(u, marginal_utility(u, x))
            assert back == pytest.approx(x, rel=1e-10)


class TestLink:
    def test_price_and_cost(self):
        assert link_price(2.0, 3.0) == 6.0
        assert link_cost(2.0, 3.0) == 9.0

    def test_zero_load(self):
        assert link_price(1.0, 0.0) == 0.0
        assert link_cost(1.0, 0.0) == 0.0

    def test_half(self):
        assert link_cost(1.0, 1.0) == 0.5

    def test_negative_load_rejected(self):
        with pytest.raises(ValueError):
            link_cost(1.0, -1.0)
        with pytest.raises(ValueError):
            link_price(1.0, -0.5)


class TestPayoff:
    def test_game2_hand_values(self):
        # Q = U(x) - (x - (1-beta)min) * a * (mid + max); beta=1/2, a=1:
        # x=(2,1): Q0 = 2 - (2 - 0.5)*2 = -1, Q1 = 1 - (1 - 0.5)*2 = 0
        s = linear_scenario([1, 1], a=1, beta=0.5)
        assert payoff(2, s, 0, (2.0, 1.0)) == pytest.approx(-1.0)
        assert payoff(2, s, 1, (2.0, 1.0)) == pytest.approx(0.0)

    def test_game2_equal_rates(self):
        s = linear_scenario([1, 1], a=1, beta=0.5)
        assert payoff(2, s, 0, (1.0, 1.0)) == pytest.approx(0.5)

    def test_all_zero_profile_pays_nothing(self):
        s = linear_scenario([1, 2, 1], a=1, beta=0.5, side=SideLinks(1, 1))
        zeros = (0.0, 0.0, 0.0)
        fa = FlowAllocation.routing_only(zeros)
        for n in range(3):
            assert payoff(1, s, n, zeros) == 0.0
            assert payoff(2, s, n, zeros) == 0.0
            assert payoff(3, s, n, fa) == 0.0

    def test_game3_hand_value(self):
        # W0 = g*(y0 + min(z1, vN)) - v1*a1*v1
        #      - (y0 + z1 - (1-b)min(z1,zN)) * a * (y0+y1+max(z1,zN))
        s = linear_scenario([2, 1], a=1, beta=0.5, side=SideLinks(0.5, 0.5))
        fa = FlowAllocation((1.0, 0.5), z1=0.4, zN=0.2, v1=0.3, vN=0.1)
        expected = 2 * (1.0 + 0.1) - 0.3 * 0.5 * 0.3 \
            - (1.0 + 0.4 - 0.5 * 0.2) * 1.0 * (1.5 + 0.4)
        assert payoff(3, s, 0, fa) == pytest.approx(expected)

    def test_index_and_type_errors(self):
        s = linear_scenario([1, 1])
        with pytest.raises(IndexError):
            payoff(1, s, 2, (1.0, 1.0))
        with pytest.raises(TypeError):
            payoff(2, s, 0, FlowAllocation.routing_only((1.0, 1.0)))
        with pytest.raises(TypeError):
            payoff(3, linear_scenario([1, 1], side=SideLinks(1, 1)), 0, (1.0, 1.0))
        with pytest.raises(ValueError):
            # side links absent: world 3 is not defined for this scenario
            payoff(3, s, 0, FlowAllocation.routing_only((1.0, 1.0)))


class TestSurplus:
    def test_p2_optimal_rates(self):
        # (g0+g1)^2/(2a) at x=(2,2)
        s = linear_scenario([1, 1], a=1)
        assert surplus(2, s, (2.0, 2.0)) == pytest.approx(2.0)

    def test_p2_hand_value(self):
        s = linear_scenario([1, 1], a=1)
        assert surplus(2, s, (1.0, 1.0)) == pytest.approx(1.5)

    def test_p3_zero(self):
        s = linear_scenario([1, 1], side=SideLinks(1, 1))
        assert surplus(3, s, FlowAllocation.routing_only((0.0, 0.0))) == 0.0

    def test_surplus_equals_payoffs_plus_net_transfers(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            s = linear_scenario(rng.uniform(0.2, 3.0, size=4), a=float(rng.uniform(0.5, 2)),
                                beta=float(rng.uniform(0.1, 1.0)))
            x = tuple(rng.uniform(0.0, 2.0, size=4))
            total_pay = model.total_payments(2, s, x)
            cost = model.link_cost(s.a, model.coded_load(x))
            payoffs = sum(payoff(2, s, i, x) for i in range(4))
            assert surplus(2, s, x) == pytest.approx(payoffs + total_pay - cost, abs=1e-9)

    def test_split_charge_at_half_beta(self):
        # with beta=1/2 and equal pair rates the two coding users together
        # pay for the coded flow once: total payments = price * load
        rng = np.random.default_rng(5)
        for _ in range(20):
            s = linear_scenario(rng.uniform(0.2, 3.0, size=4), beta=0.5)
            t = float(rng.uniform(0.0, 2.0))
            x = (t,) + tuple(rng.uniform(0.0, 2.0, size=2)) + (t,)
            load = model.coded_load(x)
            mu = model.link_price(s.a, load)
            assert model.total_payments(2, s, x) == pytest.approx(mu * load, abs=1e-9)
            assert mu * load == pytest.approx(2 * model.link_cost(s.a, load), abs=1e-9)


def test_game2_payoff_concave_in_own_rate():
    # payoffs stay concave across the kink at the peer's rate
    rng = np.random.default_rng(13)
    for _ in range(200):
        n = int(rng.integers(2, 5))
        s = linear_scenario(rng.uniform(0.1, 4.0, size=n), a=float(rng.uniform(0.5, 2.0)),
                            beta=float(rng.uniform(0.1, 1.0)))
        others = tuple(rng.uniform(0.0, 3.0, size=n))
        xa, xb = float(rng.uniform(0, 4)), float(rng.uniform(0, 4))
        theta = float(rng.uniform(0, 1))

        def q1(t):
            trial = list(others)
            trial[0] = t
            return payoff(2, s, 0, tuple(trial))

        mid = q1(theta * xa + (1 - theta) * xb)
        assert mid >= theta * q1(xa) + (1 - theta) * q1(xb) - 1e-9
