"""Fixed-capacity experience replay for multi-agent transitions.

Stores per-agent observations with possibly different dimensions per agent,
a joint integer action vector, a shared scalar reward, and a done flag.
Sampling is uniform without replacement within a batch and is driven by a
caller-supplied random generator so training runs are reproducible.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np


class ReplayBuffer:
    """Ring buffer holding joint transitions for a fixed set of agents."""

    def __init__(self, capacity: int, obs_dims: Sequence[int]):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        if not obs_dims:
            raise ValueError("need at least one agent")
        self.capacity = int(capacity)
        self.obs_dims = [int(d) for d in obs_dims]
        self.n_agents = len(self.obs_dims)
        self._obs = [np.zeros((self.capacity, d), dtype=np.float32) for d in self.obs_dims]
        self._next_obs = [np.zeros((self.capacity, d), dtype=np.float32) for d in self.obs_dims]
        self._actions = np.zeros((self.capacity, self.n_agents), dtype=np.int64)
        self._rewards = np.zeros(self.capacity, dtype=np.float32)
        self._dones = np.zeros(self.capacity, dtype=np.float32)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(
        self,
        obs: Sequence[np.ndarray],
        actions: Sequence[int],
        reward: float,
        next_obs: Sequence[np.ndarray],
        done: bool,
    ) -> None:
        if len(obs) != self.n_agents or len(next_obs) != self.n_agents:
            raise ValueError("observation list length does not match agent count")
        if len(actions) != self.n_agents:
            raise ValueError("action list length does not match agent count")
        idx = self._cursor
        for i in range(self.n_agents):
            self._obs[i][idx] = np.asarray(obs[i], dtype=np.float32)
            self._next_obs[i][idx] = np.asarray(next_obs[i], dtype=np.float32)
        self._actions[idx] = np.asarray(actions, dtype=np.int64)
        self._rewards[idx] = float(reward)
        self._dones[idx] = 1.0 if done else 0.0
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Dict[str, List[np.ndarray]]:
        if batch_size > self._size:
            raise ValueError(
                f"cannot sample {batch_size} transitions from a buffer of size {self._size}"
            )
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return {
            "obs": [self._obs[i][idx] for i in range(self.n_agents)],
            "actions": self._actions[idx],
            "rewards": self._rewards[idx],
            "next_obs": [self._next_obs[i][idx] for i in range(self.n_agents)],
            "dones": self._dones[idx],
        }
