import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzfl import theory


def exhaustive_min_K(gamma_val, beta, cap=10_000):
    """Independent oracle: scan K upward until gamma^K * C_beta^2 < 1."""
    cb2 = theory.c_beta(beta) ** 2
    for k in range(1, cap + 1):
        if gamma_val**k * cb2 < 1.0:
            return k
    raise AssertionError("no contracting K below cap")


class TestGamma:
    def test_limit_at_zero_rate(self):
        assert theory.gamma(1e-12, 1.0, 1.0, 0.0) == pytest.approx(1.0, abs=1e-10)

    def test_hand_case_mu_equals_L(self):
        # 1 - 2*1*1 + 1*1 = 0
        assert theory.gamma(1.0, 1.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_hand_case_with_noise(self):
        # 1 - 0.2 + 0.01*4*2 = 0.88
        assert theory.gamma(0.1, 1.0, 2.0, 1.0) == pytest.approx(0.88, abs=1e-15)

    def test_rejects_nonpositive_eta(self):
        with pytest.raises(ValueError):
            theory.gamma(0.0, 1.0, 1.0)

    def test_classification(self):
        assert theory.classify_gamma(0.5) == "contractive"
        assert theory.classify_gamma(1.0) == "non-contractive"
        assert theory.classify_gamma(-0.2) == "non-contractive"

    def test_convex_in_eta_minimized_at_stationary_point(self):
        # Grid scan around the analytic minimizer mu / (L^2 (1 + delta^2)).
        mu, L, delta = 0.7, 1.9, 0.3
        eta_star = mu / (L**2 * (1 + delta**2))
        g_star = theory.gamma(eta_star, mu, L, delta)
        assert g_star == pytest.approx(1 - mu**2 / (L**2 * (1 + delta**2)), rel=1e-12)
        for eta in np.linspace(eta_star / 10, eta_star * 3, 201):
            assert theory.gamma(float(eta), mu, L, delta) >= g_star - 1e-12


class TestCBeta:
    def test_beta_zero_floor(self):
        assert theory.c_beta(0.0) == pytest.approx(2.0)

    def test_hand_case(self):
        assert theory.c_beta(0.2) == pytest.approx(8.0 / 3.0, rel=1e-14)

    def test_pole_rejected(self):
        with pytest.raises(ValueError):
            theory.c_beta(0.5)
        with pytest.raises(ValueError):
            theory.c_beta(-0.01)

    @given(st.floats(min_value=0.0, max_value=0.49))
    def test_at_least_two(self, beta):
        assert theory.c_beta(beta) >= 2.0

    def test_increasing(self):
        grid = np.linspace(0.0, 0.49, 500)
        vals = [theory.c_beta(float(b)) for b in grid]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestStableEtaRange:
    def test_hand_case_mu_equals_L(self):
        lo, hi = theory.stable_eta_range(1.0, 1.0, 0.0)
        assert (lo, hi) == (0.0, 2.0)
        assert theory.gamma(1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_hand_case_mu_1_L_2(self):
        _, hi = theory.stable_eta_range(1.0, 2.0, 0.0)
        assert hi == pytest.approx(0.5)
        assert theory.gamma(0.25, 1.0, 2.0) == pytest.approx(0.75, rel=1e-14)

    @given(
        st.floats(min_value=0.05, max_value=2.0),
        st.floats(min_value=1.0, max_value=5.0),
        st.floats(min_value=0.0, max_value=2.0),
    )
    @settings(max_examples=200)
    def test_interior_is_contractive_boundary_is_not(self, mu, ratio, delta):
        L = mu * ratio
        _, eta_max = theory.stable_eta_range(mu, L, delta)
        for frac in (0.05, 0.3, 0.7, 0.95):
            g = theory.gamma(frac * eta_max, mu, L, delta)
            assert 0.0 < g < 1.0 + 1e-12
        for frac in (1.0, 1.2, 3.0):
            assert theory.gamma(frac * eta_max, mu, L, delta) >= 1.0 - 1e-12


class TestMinK:
    def test_hand_case_threshold_integral(self):
        # gamma=0.5, beta=0: threshold is exactly 2; K=2 gives 0.25*4 = 1, not < 1.
        assert theory.min_K(0.5, 0.0) == 3

    def test_hand_case_gamma_09(self):
        assert theory.min_K(0.9, 0.2) == 19
        assert 0.9**19 * theory.c_beta(0.2) ** 2 < 1.0 <= 0.9**18 * theory.c_beta(0.2) ** 2

    def test_rejects_noncontractive(self):
        with pytest.raises(ValueError):
            theory.min_K(1.0, 0.0)
        with pytest.raises(ValueError):
            theory.min_K(-0.3, 0.0)

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            g = float(rng.uniform(0.02, 0.999))
            b = float(rng.uniform(0.0, 0.49))
            k = theory.min_K(g, b)
            assert k == exhaustive_min_K(g, b), (g, b)


class TestTheorem1Bound:
    def params(self, **kw):
        base = dict(eta=0.5, mu=1.0, L_const=1.0, delta=0.0, M=10, B=0, K=3, w1_gap_sq=1.0)
        base.update(kw)
        return theory.TheoryParams(**base)

    def test_round_zero_is_initial_envelope(self):
        p = self.params(L_const=2.0, mu=1.5, w1_gap_sq=3.0)
        assert theory.theorem1_bound(0, p) == pytest.approx(3.0)

    def test_hand_case_contraction_half(self):
        # mu = sqrt(2), L = 2, eta = mu/L^2: gamma = 1 - mu^2/L^2 = 0.5 exactly.
        mu = math.sqrt(2.0)
        p = self.params(eta=mu / 4.0, L_const=2.0, mu=mu, K=3, B=0, M=10, w1_gap_sq=1.0)
        assert p.gamma == pytest.approx(0.5, rel=1e-12)
        assert p.contraction_factor == pytest.approx(0.5**3 * 4, rel=1e-12)
        assert theory.theorem1_bound(1, p) == pytest.approx(0.5, rel=1e-12)
        assert theory.theorem1_bound(2, p) == pytest.approx(0.25, rel=1e-12)

    def test_geometric_decay_to_zero(self):
        p = self.params(eta=1.0, mu=1.0, L_const=1.2, K=8, M=10, B=2)
        assert p.contraction_factor < 1.0
        series = theory.theorem1_series(p, 200)
        assert all(b2 < b1 or b1 == 0.0 for b1, b2 in zip(series.values, series.values[1:]))
        assert series.values[-1] < 1e-12 * series.values[0]

    def test_series_recurrence_exact(self):
        p = self.params(eta=0.8, mu=0.9, L_const=1.1, K=5, M=20, B=4)
        series = theory.theorem1_series(p, 50)
        for b1, b2 in zip(series.values, series.values[1:]):
            assert b2 == b1 * series.contraction_factor  # exact by construction

    def test_monotone_decreasing_iff_contractive(self):
        mu = math.sqrt(2.0)
        contractive = self.params(eta=mu / 4.0, L_const=2.0, mu=mu, K=3, B=0, M=10)
        assert contractive.contraction_factor < 1.0
        series = theory.theorem1_series(contractive, 30)
        assert all(b2 < b1 for b1, b2 in zip(series.values, series.values[1:]))
        expanding = self.params(eta=mu / 4.0, L_const=2.0, mu=mu, K=1, B=3, M=10)
        assert expanding.contraction_factor > 1.0
        series = theory.theorem1_series(expanding, 30)
        assert all(b2 > b1 for b1, b2 in zip(series.values, series.values[1:]))

    def test_min_K_is_first_monotone_K(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            g = float(rng.uniform(0.05, 0.99))
            b = float(rng.uniform(0.0, 0.45))
            k = theory.min_K(g, b)
            cb2 = theory.c_beta(b) ** 2
            assert g**k * cb2 < 1.0
            if k > 1:
                assert g ** (k - 1) * cb2 >= 1.0


def uniform_rate(eta):
    return lambda t, m, k: eta


def uniform_steps(K):
    return lambda t: K


class TestTheorem2:
    def test_round_zero(self):
        val = theory.theorem2_bound(
            0, uniform_rate(0.1), uniform_steps(3), (0, 1), 1.0, 2.0, 0.0, 3, 1, 2.0, 5.0
        )
        assert val == pytest.approx(5.0)

    def test_hand_case_round_multiplier(self):
        # Two honest clients (M=2, B=0): C_beta^2/(M-B) = 4/2 = 2. With
        # mu = L = 1, gamma(eta) = (1-eta)^2, so single-step products of
        # 0.5 and 0.3 give round multiplier 2 * (0.5 + 0.3) = 1.6.
        mu, L = 1.0, 1.0
        rates = {0: 1 - math.sqrt(0.5), 1: 1 - math.sqrt(0.3)}
        mult = theory.theorem2_round_multiplier(
            1, lambda t, m, k: rates[m], uniform_steps(1), (0, 1), mu, L, 0.0, 2, 0
        )
        assert mult == pytest.approx(1.6, rel=1e-12)

    def test_uniform_reduces_to_theorem1(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            mu = float(rng.uniform(0.2, 1.0))
            L = mu * float(rng.uniform(1.0, 3.0))
            delta = float(rng.uniform(0.0, 1.0))
            M = int(rng.integers(3, 30))
            B = int(rng.integers(0, (M - 1) // 2 + 1))
            _, eta_max = theory.stable_eta_range(mu, L, delta)
            eta = float(rng.uniform(0.1, 0.95)) * eta_max
            K = int(rng.integers(1, 10))
            gap = float(rng.uniform(0.1, 5.0))
            p = theory.TheoryParams(
                eta=eta, mu=mu, L_const=L, delta=delta, M=M, B=B, K=K, w1_gap_sq=gap
            )
            honest = tuple(range(M - B))
            for t in (0, 1, 2, 5, 17, 100):
                b1 = theory.theorem1_bound(t, p)
                b2 = theory.theorem2_bound(
                    t, uniform_rate(eta), uniform_steps(K), honest, mu, L, delta, M, B, L, gap
                )
                assert b2 == pytest.approx(b1, rel=1e-12)

    def test_nonpositive_factor_flagged_but_evaluated(self):
        # mu = L = 1, eta = 1 gives a per-step factor of exactly 0.
        with pytest.warns(RuntimeWarning):
            val = theory.theorem2_round_multiplier(
                1, uniform_rate(1.0), uniform_steps(2), (0, 1), 1.0, 1.0, 0.0, 2, 0
            )
        assert val == 0.0


class TestZeroGapCondition:
    def test_uniform_equivalence_with_contraction(self):
        mu, L, delta = 1.0, 2.0, 0.0
        M, B = 10, 2
        honest = tuple(range(M - B))
        _, eta_max = theory.stable_eta_range(mu, L, delta)
        eta = 0.5 * eta_max
        g = theory.gamma(eta, mu, L, delta)
        for K in range(1, 40):
            cond = theory.zero_gap_condition(
                1, uniform_rate(eta), uniform_steps(K), honest, mu, L, delta, M, B
            )
            assert cond == (g**K * theory.c_beta(B / M) ** 2 < 1.0)

    def test_hand_case_honest_sum(self):
        # M=10, B=2: threshold (M-B)/C_beta^2 = 8 / (8/3)^2 = 1.125.
        # All-one factors (K=0 steps) give sum = 8 -> False.
        M, B = 10, 2
        honest = tuple(range(8))
        cond = theory.zero_gap_condition(
            1, uniform_rate(0.1), lambda t: 0, honest, 1.0, 1.0, 0.0, M, B
        )
        assert cond is False
        # Single-step factors 0.125 each give sum 1.0 < 1.125 -> True.
        # gamma(eta) = (1-eta)^2 = 0.125 -> eta = 1 - sqrt(0.125)
        eta = 1 - math.sqrt(0.125)
        cond = theory.zero_gap_condition(
            1, uniform_rate(eta), lambda t: 1, honest, 1.0, 1.0, 0.0, M, B
        )
        assert cond is True
