"""Self-checks of the Monte Carlo oracles on analytically trivial cases."""

import math

import pytest

from freshcov.oracles import (
    expected_interferers_per_trial,
    interferer_field_radius,
    outage_probability_mc,
    renewal_violation_mc,
)

from factories import make_channel


class TestOutageOracle:
    def test_noise_only_matches_exponential_law(self):
        ch = make_channel(sink_intensity=0.0, noise_power=1e-9)
        # Without interferers the outage is 1 - exp(-threshold*d^alpha*noise/P).
        rate_ratio = ch.target_rate("local") / ch.bandwidth
        threshold = 2.0**rate_ratio - 1.0
        exact = -math.expm1(-threshold * 100.0**4 / ch.tx_power * ch.noise_power)
        mc = outage_probability_mc("local", 100.0, ch, trials=400_000, seed=5)
        assert mc == pytest.approx(exact, abs=0.005)

    def test_deterministic_given_seed(self):
        ch = make_channel()
        a = outage_probability_mc("local", 80.0, ch, trials=50_000, seed=9)
        b = outage_probability_mc("local", 80.0, ch, trials=50_000, seed=9)
        assert a == b

    def test_field_radius_floor(self):
        ch = make_channel(sink_intensity=0.0)
        assert interferer_field_radius("edge", 50.0, ch) == 200.0

    def test_expected_points_scale_with_density(self):
        sparse = make_channel(sink_intensity=1e-5)
        dense = make_channel(sink_intensity=1e-4)
        assert expected_interferers_per_trial(
            "edge", 100.0, dense
        ) > expected_interferers_per_trial("edge", 100.0, sparse)


class TestRenewalOracle:
    def test_every_round_updates(self):
        # p_s=1, outage-free, one attempt: update every round, age resets to
        # 2 + tau_mode, cycles are exactly one round long.
        stats = renewal_violation_mc(
            1.0, 1.0, 0.0, 0.0, 1, 8, 1, 2, 18, rounds=20_000, seed=1
        )
        assert stats.mean_inter_update == pytest.approx(8.0)
        assert stats.violation_prob == 0.0

    def test_tight_budget_always_violates(self):
        stats = renewal_violation_mc(
            1.0, 1.0, 0.0, 0.0, 1, 8, 1, 2, 1, rounds=20_000, seed=1
        )
        assert stats.violation_prob == 1.0

    def test_partial_budget_fraction(self):
        # Updates land every round at age exactly 3; budget 5 keeps ages
        # {3, 4, 5} fresh out of {3..10}: violation 5/8.
        stats = renewal_violation_mc(
            1.0, 1.0, 0.0, 0.0, 1, 8, 1, 2, 5, rounds=20_000, seed=1
        )
        assert stats.violation_prob == pytest.approx(5.0 / 8.0)

    def test_mean_inter_update_geometric(self):
        # Updates are a per-round Bernoulli(0.25) thinning here.
        stats = renewal_violation_mc(
            0.5, 1.0, 0.5, 0.5, 1, 8, 1, 2, 18, rounds=1_000_000, seed=4
        )
        assert stats.mean_inter_update == pytest.approx(8 / 0.25, rel=0.01)

    def test_no_updates_returns_none(self):
        assert (
            renewal_violation_mc(0.0, 0.5, 0.2, 0.2, 2, 8, 1, 2, 18, rounds=1000)
            is None
        )

    def test_pair_counts_partition_cycles(self):
        stats = renewal_violation_mc(
            0.7, 0.5, 0.4, 0.2, 3, 8, 1, 2, 18, rounds=200_000, seed=6
        )
        assert sum(stats.pair_cycle_counts.values()) == stats.n_cycles
        assert all(count > 0 for count in stats.pair_cycle_counts.values())
