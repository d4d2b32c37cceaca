import math

import numpy as np
import pytest
from scipy import stats

from branchimm import generator, oracle
from branchimm.model import ModelSpec

from conftest import critical, immigration_death, pure_death, subcritical

# E_1 sigma_0 for the subcritical reference model, from an mpmath evaluation
H1_SUB = 4.0625


class TestTransition:
    def test_pure_death_closed_form(self):
        # each of i particles dies at rate 1, so p_{i0}(t) = (1 - e^-t)^i
        g = generator.build(pure_death(), "Q", 40)
        for t in (0.3, 0.7, 2.0):
            p = oracle.transition_probs(g, 10, t)
            assert p[0] == pytest.approx((1 - math.exp(-t)) ** 10, abs=1e-12)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_uniformization_matches_ode(self, rich):
        g = generator.build(rich, "Q", 150)
        a = oracle.transition_probs(g, 3, 0.8)
        b = oracle.transition_probs_ode(g, 3, 0.8)
        assert np.max(np.abs(a - b)) < 1e-8

    def test_time_zero_and_errors(self, sub):
        g = generator.build(sub, "Q", 20)
        assert oracle.transition_probs(g, 4, 0.0)[4] == 1.0
        with pytest.raises(ValueError):
            oracle.transition_probs(g, 4, -1.0)
        with pytest.raises(IndexError):
            oracle.transition_probs(g, 40, 1.0)

    def test_forward_residual_is_second_order(self, sub):
        g = generator.build(sub, "Q", 200)
        r1 = oracle.forward_residual(g, 5, 1.0, 1e-3)
        r2 = oracle.forward_residual(g, 5, 1.0, 5e-4)
        assert r1 < 1e-6
        assert r2 < r1 / 3


class TestStationary:
    @pytest.mark.parametrize("gamma,alpha", [(2.0, 1.0), (3.0, 1.5)])
    def test_immigration_death_is_poisson(self, gamma, alpha):
        st = oracle.stable_stationary(immigration_death(gamma, alpha))
        ref = stats.poisson.pmf(np.arange(len(st.mu)), gamma / alpha)
        assert np.max(np.abs(st.mu - ref)) < 1e-10

    def test_gf_identity(self, sub):
        st = oracle.stable_stationary(sub)
        assert oracle.stationary_gf_residual(sub, st.mu) < 1e-8
        bent = st.mu.copy()
        bent[1] += 1e-4
        bent[2] -= 1e-4
        assert oracle.stationary_gf_residual(sub, bent) > 1e-6

    def test_pure_death_concentrates_at_zero(self):
        st = oracle.stationary(generator.build(pure_death(), "Q", 20))
        assert st.mu[0] == pytest.approx(1.0, abs=1e-14)

    def test_two_closed_classes_is_singular(self):
        # no deaths and no immigration: 0 and the top of the truncation both trap
        with pytest.raises(oracle.SingularSystem):
            oracle.stationary(generator.build(ModelSpec.build([0.0, 0, 1.0]), "Q", 20))

    def test_needs_reflecting_boundary(self, sub):
        with pytest.raises(ValueError):
            oracle.stationary(generator.build(sub, "Q", 20, "absorb_at_N"))

    def test_unstable_truncation(self, sub):
        with pytest.raises(oracle.TruncationUnstable):
            oracle.stable_stationary(sub, N=16, N_max=16)


class TestHitting:
    def test_pure_death_harmonic(self):
        hit = oracle.hitting_times(generator.build(pure_death(), "Q_absorbed", 50))
        assert hit[3] == pytest.approx(11 / 6, abs=1e-12)
        assert hit[0] == 0.0

    def test_subcritical_reference(self, sub):
        hit = oracle.stable_hitting_times(sub)
        assert hit[1] == pytest.approx(H1_SUB, abs=1e-6)
        assert oracle.expected_return_time(sub, hit) == pytest.approx(1.0 + H1_SUB, abs=1e-6)

    def test_return_time_needs_immigration(self):
        hit = oracle.hitting_times(generator.build(pure_death(), "Q_absorbed", 20))
        with pytest.raises(ValueError):
            oracle.expected_return_time(pure_death(), hit)

    def test_no_path_to_zero(self):
        s = ModelSpec.build([0.0, 0, 1.0], {1: 1.0}, 1.0)
        with pytest.raises(oracle.SingularSystem):
            oracle.hitting_times(generator.build(s, "Q_absorbed", 20))

    def test_transient_truncation_unstable(self):
        with pytest.raises(oracle.TruncationUnstable):
            oracle.stable_hitting_times(critical(2.0), N=64, N_max=1024)


class TestIdentities:
    @pytest.mark.parametrize("theta", [1.0, 1.5, 2.0])
    def test_forward_and_resolvent(self, theta):
        s = subcritical(theta)
        g = generator.build(s, "Q_absorbed", 400)
        assert oracle.forward_gf_residual(g, 5, 1.0) < 1e-10
        assert oracle.resolvent_residual(g, 5, 1.0) < 1e-10

    def test_resolvent_needs_positive_lambda(self, sub):
        with pytest.raises(ValueError):
            oracle.resolvent(generator.build(sub, "Q", 10), 1, 0.0)
