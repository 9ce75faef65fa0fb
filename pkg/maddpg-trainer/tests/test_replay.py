"""Replay buffer: ring semantics, sampling distribution, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from maddpg_trainer import ReplayBuffer


def _transition(buffer, tag):
    obs = [np.full(d, tag, dtype=np.float32) for d in buffer.obs_dims]
    next_obs = [np.full(d, tag + 0.5, dtype=np.float32) for d in buffer.obs_dims]
    actions = [tag % 3] * buffer.n_agents
    return obs, actions, float(tag), next_obs, tag % 2 == 0


def _fill(buffer, count):
    for tag in range(count):
        buffer.add(*_transition(buffer, tag))


class TestRing:
    def test_grows_then_saturates(self):
        buf = ReplayBuffer(8, [4, 7])
        assert len(buf) == 0
        _fill(buf, 5)
        assert len(buf) == 5
        _fill(buf, 10)
        assert len(buf) == 8

    def test_overwrites_oldest_first(self):
        buf = ReplayBuffer(4, [2])
        _fill(buf, 6)  # tags 0..5; ring keeps 2..5
        kept = sorted(float(buf._rewards[i]) for i in range(len(buf)))
        assert kept == [2.0, 3.0, 4.0, 5.0]

    def test_rejects_mismatched_agent_count(self):
        buf = ReplayBuffer(4, [2, 3])
        obs, actions, reward, next_obs, done = _transition(buf, 0)
        with pytest.raises(ValueError):
            buf.add(obs[:1], actions, reward, next_obs, done)
        with pytest.raises(ValueError):
            buf.add(obs, actions + [0], reward, next_obs, done)


class TestSampling:
    def test_no_replacement_within_batch(self):
        buf = ReplayBuffer(64, [3])
        _fill(buf, 64)
        rng = np.random.default_rng(0)
        batch = buf.sample(64, rng)
        # A full-size batch without replacement is a permutation of the store.
        assert sorted(batch["rewards"].tolist()) == [float(t) for t in range(64)]

    def test_uniform_marginal_frequencies(self):
        buf = ReplayBuffer(20, [2])
        _fill(buf, 20)
        rng = np.random.default_rng(42)
        counts = np.zeros(20)
        draws = 4000
        for _ in range(draws):
            batch = buf.sample(5, rng)
            for r in batch["rewards"]:
                counts[int(r)] += 1
        freq = counts / (draws * 5)
        # Each item should appear with probability 1/20 = 0.05.
        assert np.all(np.abs(freq - 0.05) < 0.01)

    def test_sample_larger_than_store_rejected(self):
        buf = ReplayBuffer(16, [2])
        _fill(buf, 3)
        with pytest.raises(ValueError):
            buf.sample(4, np.random.default_rng(0))

    def test_deterministic_given_rng(self):
        buf = ReplayBuffer(32, [3, 5])
        _fill(buf, 32)
        one = buf.sample(8, np.random.default_rng(9))
        two = buf.sample(8, np.random.default_rng(9))
        assert np.array_equal(one["actions"], two["actions"])
        assert np.array_equal(one["rewards"], two["rewards"])
        for a, b in zip(one["obs"], two["obs"]):
            assert np.array_equal(a, b)

    def test_fields_stay_aligned(self):
        buf = ReplayBuffer(40, [2, 3])
        _fill(buf, 40)
        batch = buf.sample(10, np.random.default_rng(3))
        for row in range(10):
            tag = batch["rewards"][row]
            assert np.all(batch["obs"][0][row] == tag)
            assert np.all(batch["obs"][1][row] == tag)
            assert np.all(batch["next_obs"][0][row] == tag + 0.5)
            assert batch["actions"][row, 0] == int(tag) % 3
            assert batch["dones"][row] == (1.0 if int(tag) % 2 == 0 else 0.0)
