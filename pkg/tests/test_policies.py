"""Action vocabulary, policy specs, decision dispatch, and coercion."""

import math

import numpy as np
import pytest

from freshcov.model import CoverageGrid, sensing_radius
from freshcov.params import MODE_EDGE, MODE_LOCAL
from freshcov.policies import (
    Action,
    PolicySpec,
    RoundObservation,
    cic_coverage_ratio,
    coerce_actions,
    decide,
    make_policy,
)

from factories import make_correlation


def free_obs(n, battery=100.0):
    return [
        RoundObservation(
            sensor_id=i, battery=battery, busy=False, can_sense=True, waiting_time=0
        )
        for i in range(n)
    ]


class TestAction:
    def test_wire_codes_are_stable(self):
        assert int(Action.EDGE) == 0
        assert int(Action.LOCAL) == 1
        assert int(Action.IDLE) == 2

    def test_mode_mapping(self):
        assert Action.EDGE.mode == MODE_EDGE
        assert Action.LOCAL.mode == MODE_LOCAL
        assert Action.IDLE.mode is None


class TestPolicySpec:
    def test_probability_factory(self):
        spec = PolicySpec.probability(0.3, 0.7)
        assert spec.kind == "probability-scd"
        assert spec.sense_prob == 0.3
        assert spec.edge_prob == 0.7

    def test_always_factory(self):
        spec = PolicySpec.always(MODE_LOCAL, sense_prob=0.8)
        assert spec.kind == "always-mode"
        assert spec.mode == MODE_LOCAL

    def test_cic_wraps_inner_and_overrides_scoring(self):
        inner = PolicySpec.probability(0.5, 0.5)
        spec = PolicySpec.cic(inner)
        assert spec.inner == inner
        assert spec.coverage_mode_override == "cic"
        assert inner.coverage_mode_override is None

    def test_probability_bounds_validated(self):
        with pytest.raises(ValueError, match="sense_prob"):
            PolicySpec.probability(1.5, 0.5)
        with pytest.raises(ValueError, match="edge_prob"):
            PolicySpec.probability(0.5, -0.1)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            PolicySpec(kind="oracle")

    def test_cic_requires_inner(self):
        with pytest.raises(ValueError, match="inner"):
            PolicySpec(kind="cic-variant")

    def test_dict_round_trip(self):
        for spec in (
            PolicySpec.probability(0.25, 0.75),
            PolicySpec.always(MODE_EDGE, 0.5),
            PolicySpec.external(),
            PolicySpec.cic(PolicySpec.probability(0.1, 0.9)),
        ):
            assert PolicySpec.from_dict(spec.to_dict()) == spec

    def test_from_dict_rejects_unknown_field(self):
        with pytest.raises(ValueError, match="temperature"):
            PolicySpec.from_dict({"kind": "external", "temperature": 1.0})


class TestProbabilityScd:
    def test_empirical_action_shares(self):
        policy = make_policy(PolicySpec.probability(0.5, 0.5))
        rng = np.random.default_rng(3)
        counts = {a: 0 for a in Action}
        n = 40_000
        for action in policy.raw_intents(free_obs(n), rng):
            counts[action] += 1
        # Expected shares: edge 0.25, local 0.25, idle 0.5; 4-sigma bands.
        for action, share in ((Action.EDGE, 0.25), (Action.LOCAL, 0.25), (Action.IDLE, 0.5)):
            sigma = math.sqrt(share * (1 - share) / n)
            assert abs(counts[action] / n - share) < 4 * sigma

    def test_consumes_two_draws_per_sensor_always(self):
        # The action stream must be predictable from the raw uniform stream:
        # sensor i uses draws 2i (sense) and 2i+1 (mode), idle or not.
        spec = PolicySpec.probability(0.4, 0.6)
        rng = np.random.default_rng(11)
        draws = rng.random(10)
        expected = []
        for i in range(5):
            if draws[2 * i] < 0.4:
                expected.append(Action.EDGE if draws[2 * i + 1] < 0.6 else Action.LOCAL)
            else:
                expected.append(Action.IDLE)
        policy = make_policy(spec)
        got = policy.raw_intents(free_obs(5), np.random.default_rng(11))
        assert got == expected

    def test_degenerate_probabilities(self):
        rng = np.random.default_rng(0)
        never = make_policy(PolicySpec.probability(0.0, 0.5))
        assert never.raw_intents(free_obs(50), rng) == [Action.IDLE] * 50
        always_edge = make_policy(PolicySpec.probability(1.0, 1.0))
        assert always_edge.raw_intents(free_obs(50), rng) == [Action.EDGE] * 50
        always_local = make_policy(PolicySpec.probability(1.0, 0.0))
        assert always_local.raw_intents(free_obs(50), rng) == [Action.LOCAL] * 50


class TestAlwaysMode:
    def test_fixed_mode(self):
        rng = np.random.default_rng(0)
        policy = make_policy(PolicySpec.always(MODE_LOCAL))
        assert policy.raw_intents(free_obs(20), rng) == [Action.LOCAL] * 20

    def test_sense_prob_still_applies(self):
        policy = make_policy(PolicySpec.always(MODE_EDGE, sense_prob=0.0))
        rng = np.random.default_rng(0)
        assert policy.raw_intents(free_obs(20), rng) == [Action.IDLE] * 20


class TestExternal:
    def test_actions_consumed_once_then_idle(self):
        policy = make_policy(PolicySpec.external())
        rng = np.random.default_rng(0)
        policy.set_actions([0, 1, 2])
        assert policy.raw_intents(free_obs(3), rng) == [
            Action.EDGE,
            Action.LOCAL,
            Action.IDLE,
        ]
        assert policy.raw_intents(free_obs(3), rng) == [Action.IDLE] * 3

    def test_length_mismatch_rejected(self):
        policy = make_policy(PolicySpec.external())
        policy.set_actions([0, 1])
        with pytest.raises(ValueError, match="2 actions"):
            policy.raw_intents(free_obs(3), np.random.default_rng(0))

    def test_cic_wrapper_forwards_external_actions(self):
        policy = make_policy(PolicySpec.cic(PolicySpec.external()))
        policy.set_actions([1])
        assert policy.raw_intents(free_obs(1), np.random.default_rng(0)) == [Action.LOCAL]

    def test_cic_wrapper_rejects_actions_for_non_external_inner(self):
        policy = make_policy(PolicySpec.cic(PolicySpec.probability(0.5, 0.5)))
        with pytest.raises(TypeError, match="external"):
            policy.set_actions([0])


class TestCoercion:
    def test_busy_and_starved_requests_become_idle(self):
        obs = [
            RoundObservation(0, 100.0, busy=True, can_sense=True, waiting_time=0),
            RoundObservation(1, 1.0, busy=False, can_sense=False, waiting_time=0),
            RoundObservation(2, 100.0, busy=False, can_sense=True, waiting_time=0),
        ]
        actions, coerced = coerce_actions(
            [Action.EDGE, Action.LOCAL, Action.EDGE], obs
        )
        assert actions == [Action.IDLE, Action.IDLE, Action.EDGE]
        assert coerced == 2

    def test_idle_requests_are_never_counted(self):
        obs = [RoundObservation(0, 0.0, busy=True, can_sense=False, waiting_time=0)]
        actions, coerced = coerce_actions([Action.IDLE], obs)
        assert actions == [Action.IDLE]
        assert coerced == 0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="intents"):
            coerce_actions([Action.IDLE], free_obs(2))

    def test_decide_returns_legal_actions(self):
        policy = make_policy(PolicySpec.probability(1.0, 1.0))
        obs = [
            RoundObservation(0, 100.0, busy=True, can_sense=True, waiting_time=0),
            RoundObservation(1, 100.0, busy=False, can_sense=True, waiting_time=0),
        ]
        actions = decide(policy, obs, np.random.default_rng(0))
        assert actions == [Action.IDLE, Action.EDGE]


class TestCicCoverageRatio:
    def test_single_active_sensor_disc_share(self):
        corr = make_correlation()
        grid = CoverageGrid.rectangle(250.0, 250.0, 1.0)
        round_s = 8 * 0.01
        ratio = cic_coverage_ratio(grid, [((125.0, 125.0), True)], corr, round_s)
        radius = sensing_radius(round_s, corr)
        assert radius == pytest.approx(77.8101, abs=1e-3)
        expected = math.pi * radius**2 / (250.0 * 250.0)
        assert ratio == pytest.approx(expected, rel=0.02)

    def test_inactive_sensors_cover_nothing(self):
        corr = make_correlation()
        grid = CoverageGrid.rectangle(100.0, 100.0, 5.0)
        assert cic_coverage_ratio(grid, [((50.0, 50.0), False)], corr, 0.08) == 0.0
        assert cic_coverage_ratio(grid, [], corr, 0.08) == 0.0

    def test_stale_radius_beyond_budget_covers_nothing(self):
        corr = make_correlation()
        grid = CoverageGrid.rectangle(100.0, 100.0, 5.0)
        # One full round of staleness already exceeds the error budget.
        assert cic_coverage_ratio(grid, [((50.0, 50.0), True)], corr, 10.0) == 0.0
