import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from branchimm import simulator as sim

from conftest import immigration_death, pure_death, rich_spec, subcritical, supercritical


class TestAlias:
    @settings(max_examples=40)
    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda w: sum(w) > 0.01))
    def test_round_trip(self, weights):
        p = np.array(weights) / sum(weights)
        assert np.allclose(sim.AliasTable.build(p).pmf(), p, atol=1e-12)


class TestPaths:
    def test_byte_identical_and_replica_keyed(self, rich):
        a = sim.simulate(rich, 3, 5.0, seed=11, replica=4).to_csv()
        assert a == sim.simulate(rich, 3, 5.0, seed=11, replica=4).to_csv()
        assert a != sim.simulate(rich, 3, 5.0, seed=11, replica=5).to_csv()

    def test_csv_layout(self, sub):
        p = sim.simulate(sub, 2, 50.0, seed=1)
        lines = p.to_csv().splitlines()
        assert lines[0] == "time,state" and lines[1] == "0,2"
        assert lines[-1].startswith(f"# terminal={p.terminal_label}")
        times = [float(ln.split(",")[0]) for ln in lines[2:-1]]
        assert times == sorted(times) and len(times) == p.n_jumps

    def test_jumps_follow_supports(self, rich):
        p = sim.simulate(rich, 5, 20.0, seed=2)
        steps = set(np.diff(p.states).tolist())
        # branching moves by k - 1 with k in {0, 2, 3}; immigration by 1 or 3
        assert steps <= {-1, 1, 2, 3}

    def test_pure_death_absorbs(self):
        p = sim.simulate(pure_death(), 4, 1e6, seed=0)
        assert p.terminal == "absorbed" and p.terminal_label == "absorbed(0)"
        assert list(p.states) == [4, 3, 2, 1, 0]

    def test_caps(self):
        p = sim.simulate(supercritical(2.0), 10, 1e3, state_cap=500, seed=0)
        assert p.terminal == "exploded_cap" and p.terminal_state >= 500
        q = sim.simulate(subcritical(), 10, 1e6, jump_cap=7, seed=0)
        assert q.terminal == "jump_cap" and q.n_jumps == 7

    def test_bad_arguments(self, sub):
        with pytest.raises(ValueError):
            sim.simulate(sub, 1, 0.0)
        with pytest.raises(ValueError):
            sim.simulate(sub, 1, 1.0, state_cap=0)


class TestEnsemble:
    def test_replica_matches_single_run(self, sub):
        ens = sim.run_ensemble(sub, 3, 4.0, 20, seed=9)
        p = sim.simulate(sub, 3, 4.0, seed=9, replica=13)
        assert ens.states[13] == p.terminal_state
        assert ens.end_times[13] == p.end_time
        assert ens.jumps[13] == p.n_jumps

    def test_thread_split_is_irrelevant(self, rich):
        a = sim.run_ensemble(rich, 2, 3.0, 64, seed=5)
        b = sim.run_ensemble(rich, 2, 3.0, 64, seed=5, workers=3)
        assert np.array_equal(a.states, b.states) and np.array_equal(a.end_times, b.end_times)
        assert sum(a.counts().values()) == 64


class TestEstimators:
    def test_pure_death_hitting(self):
        est = sim.estimate_hitting(pure_death(), 3, 20_000, seed=3)
        assert abs(est.mean - 11 / 6) < 4 * est.std_error
        assert est.censored_fraction == 0.0

    def test_hitting_errors(self, sub):
        with pytest.raises(ValueError):
            sim.estimate_hitting(sub, 1, 50)
        with pytest.raises(RuntimeError):
            sim.estimate_hitting(supercritical(1.0), 50, 100, horizon=0.01)

    def test_occupation_matches_poisson(self):
        occ = sim.occupation_frequencies(immigration_death(2.0), 0, 200.0, 20.0, 200, seed=1, n_states=12)
        ref = stats.poisson.pmf(np.arange(12), 2.0)
        assert np.all(np.abs(occ.freq[:12] - ref) < 5 * occ.std_error[:12] + 1e-3)
        assert occ.freq.sum() == pytest.approx(1.0)

    def test_sample_jumps_law(self):
        s = rich_spec()
        draws = sim.sample_jumps(s, 4, 50_000, seed=7)
        r = s.rate(4)
        # +3 needs an immigration batch of 3; +2 needs three offspring
        p_up3 = s.gamma * 0.5 / (r + s.gamma)
        p_up2 = r * 0.5 / (r + s.gamma)
        assert np.mean(draws == 7) == pytest.approx(p_up3, abs=5 * math.sqrt(p_up3 / 50_000))
        assert np.mean(draws == 6) == pytest.approx(p_up2, abs=5 * math.sqrt(p_up2 / 50_000))

    def test_cap_hit_count_stops_early(self):
        res = sim.cap_hit_count(supercritical(2.0), 10, 50.0, 10**4, 200, seed=0, stop_hits=20)
        assert res.hits == 20 and res.run < 200
        lo, hi = res.bounds
        assert lo == 0.1 and hi == pytest.approx((20 + 200 - res.run) / 200)


class TestSpecExamples:
    def test_frozen_start(self):
        s = pure_death()
        p = sim.simulate(s, 0, 10.0)
        assert p.n_jumps == 0 and p.terminal_label == "absorbed(0)"
        occ = sim.occupation_frequencies(s, 0, 10.0, 1.0, 5, n_states=4)
        assert occ.freq[0] == 1.0

    def test_single_clock(self):
        est = sim.estimate_hitting(pure_death(), 1, 10_000, seed=2)
        assert abs(est.mean - 1.0) < 3 * est.std_error

    def test_return_time_from_zero(self, sub):
        from branchimm import oracle

        ref = oracle.expected_return_time(sub, oracle.stable_hitting_times(sub))
        est = sim.estimate_hitting(sub, 0, 10_000, seed=0)
        assert abs(est.mean - ref) < 3 * est.std_error

    def test_occupation_total_variation(self, sub):
        from branchimm import oracle

        mu = oracle.stable_stationary(sub).mu
        # 100 replicas of 10^4 time units after burn-in
        occ = sim.occupation_frequencies(sub, 0, 10_100.0, 100.0, 100, seed=0, n_states=64)
        tv = 0.5 * (np.abs(occ.freq[:64] - mu[:64]).sum() + abs(occ.freq[64] - mu[64:].sum()))
        assert tv < 0.01

    def test_replica_streams_uncorrelated(self):
        a = sim.rng_for(0, 0).exponential(size=20_000)
        b = sim.rng_for(0, 1).exponential(size=20_000)
        # |corr| of independent samples is about N^-1/2 = 0.007
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.03

    def test_down_steps_are_single(self, rich):
        p = sim.simulate(rich, 30, 50.0, seed=8)
        assert np.diff(p.states).min() >= -1 and p.states.min() >= 0
        assert np.all(np.diff(p.jump_times) > 0)
