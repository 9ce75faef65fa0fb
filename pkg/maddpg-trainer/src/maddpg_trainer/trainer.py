"""Centralized-critic multi-agent policy-gradient training loop.

One learner process drives one environment session.  Each episode rolls
out the configured number of rounds, storing joint transitions in a
shared replay buffer; after the rollout every agent samples a minibatch,
fits its centralized critic to the one-step temporal-difference target,
follows the critic's action-value gradient for its actor, and blends the
result into its target networks.

Discrete actions are drawn through hard (straight-through) Gumbel-Softmax
samples during training; evaluation uses the greedy argmax.  Three policy
variants restrict which wire actions the actor may emit:

* ``scd``   — full choice: offload, compute locally, or idle.
* ``sd-ec`` — offload or idle (no local computing).
* ``sd-lc`` — compute locally or idle (no offloading).

Illegal requests are never masked out of the actor: the environment
coerces them to idle and the penalty term teaches avoidance.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from .nets import ActorNet, CriticNet, soft_update
from .protocol import EnvClient
from .replay import ReplayBuffer

__all__ = [
    "ACTION_TABLES",
    "FEATURE_SCALES",
    "MaddpgTrainer",
    "TrainerConfig",
    "featurize",
]

# Wire action codes understood by the environment.
ACTION_EDGE, ACTION_LOCAL, ACTION_IDLE = 0, 1, 2

# Each variant's actor emits one logit per entry; the chosen index maps to
# the wire action at that position.
ACTION_TABLES: Dict[str, Tuple[int, ...]] = {
    "scd": (ACTION_EDGE, ACTION_LOCAL, ACTION_IDLE),
    "sd-ec": (ACTION_EDGE, ACTION_IDLE),
    "sd-lc": (ACTION_LOCAL, ACTION_IDLE),
}

# Fixed observation scaling applied before the actor/critic networks.
# The protocol leaves normalization to the consumer; these constants are
# recorded in every checkpoint manifest so a checkpoint replays exactly.
FEATURE_SCALES: Dict[str, float] = {
    "battery_mj": 100.0,   # battery level divisor
    "age_slots": 200.0,    # age divisor; ages clip here, unknown age maps to 1.0
    "wait_slots": 20.0,    # queued-work wait divisor
}


def featurize(raw: Sequence[Optional[float]]) -> np.ndarray:
    """Scale one wire observation vector into network inputs.

    The wire layout is ``[battery, sink_age, sensor_age]`` per visible
    sensor followed by one queued-work wait entry.  Batteries divide by
    the battery scale; ages clip at the age ceiling and divide by it,
    with unknown (``None``) ages mapping to the ceiling; the trailing
    wait divides by the wait scale.
    """
    if len(raw) < 4 or len(raw) % 3 != 1:
        raise ValueError(
            f"observation length {len(raw)} does not match 3k+1 wire layout"
        )
    battery_scale = FEATURE_SCALES["battery_mj"]
    age_ceiling = FEATURE_SCALES["age_slots"]
    wait_scale = FEATURE_SCALES["wait_slots"]
    out = np.empty(len(raw), dtype=np.float32)
    for i, value in enumerate(raw[:-1]):
        if i % 3 == 0:
            out[i] = value / battery_scale
        elif value is None:
            out[i] = 1.0
        else:
            out[i] = min(float(value), age_ceiling) / age_ceiling
    out[-1] = raw[-1] / wait_scale
    return out


def expected_rounds(scenario: Dict[str, Any]) -> int:
    """Episode length in rounds from the scenario document (schema default 20)."""
    timing = scenario.get("timing") or {}
    return int(timing.get("rounds_per_episode", 20))


def reward_to_coverage(total_reward: float, n_rounds: int, scenario: Dict[str, Any]) -> float:
    """Recover the share of covered slots from an episode's total reward.

    Every slot contributes +1 when the coverage target is met and minus
    the scenario's penalty when it is missed, so with ``S`` slots and
    penalty ``v`` the covered count is ``(reward + v*S) / (1 + v)``.
    Slot count and penalty come from the scenario document, falling back
    to the environment schema's published defaults.
    """
    timing = scenario.get("timing") or {}
    round_slots = int(timing.get("round_slots", 8))
    penalty = float(scenario.get("penalty", 1.0))
    slots = n_rounds * round_slots
    if slots <= 0:
        return 0.0
    covered = (total_reward + penalty * slots) / (1.0 + penalty)
    return covered / slots


@dataclass
class TrainerConfig:
    """Every knob of one training run; defaults follow the reference setup.

    The discount and soft-update mix mirror the reference parameter
    table; learning rates, replay capacity, and the exploration
    temperature schedule are this trainer's documented defaults (the
    source setting does not report them).
    """

    episodes: int = 2000
    variant: str = "scd"
    gamma: float = 0.95
    soft_update_mix: float = 0.005
    batch_size: int = 512
    replay_capacity: int = 100_000
    hidden_sizes: Tuple[int, int] = (64, 64)
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    gumbel_tau_start: float = 1.0
    gumbel_tau_end: float = 1.0
    init_idle_bias: float = 0.0
    updates_per_episode: int = 1
    warmup_episodes: int = 0
    actor_warmup_episodes: int = 0
    eval_every: Optional[int] = None
    eval_episodes: int = 10
    seed: int = 0
    torch_threads: Optional[int] = 1
    progress_every: Optional[int] = None

    def validate(self) -> None:
        if self.episodes <= 0:
            raise ValueError("episodes must be positive")
        if self.variant not in ACTION_TABLES:
            raise ValueError(
                f"unknown variant {self.variant!r}; choose from {sorted(ACTION_TABLES)}"
            )
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.soft_update_mix <= 1.0:
            raise ValueError("soft_update_mix must lie in (0, 1]")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must be at least batch_size")
        if len(self.hidden_sizes) != 2 or any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be two positive layer widths")
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            raise ValueError("learning rates must be positive")
        if self.gumbel_tau_start <= 0 or self.gumbel_tau_end <= 0:
            raise ValueError("Gumbel-Softmax temperatures must be positive")
        if not math.isfinite(self.init_idle_bias):
            raise ValueError("init_idle_bias must be finite")
        if self.updates_per_episode < 0:
            raise ValueError("updates_per_episode must be >= 0")
        if self.warmup_episodes < 0:
            raise ValueError("warmup_episodes must be >= 0")
        if self.actor_warmup_episodes < 0:
            raise ValueError("actor_warmup_episodes must be >= 0")
        if self.eval_every is not None and self.eval_every <= 0:
            raise ValueError("eval_every must be positive when set")
        if self.eval_episodes <= 0:
            raise ValueError("eval_episodes must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.torch_threads is not None and self.torch_threads <= 0:
            raise ValueError("torch_threads must be positive when set")
        if self.progress_every is not None and self.progress_every <= 0:
            raise ValueError("progress_every must be positive when set")

    def gumbel_tau(self, episode: int) -> float:
        """Linearly annealed exploration temperature for one episode."""
        if self.episodes <= 1:
            return self.gumbel_tau_start
        frac = min(max(episode / (self.episodes - 1), 0.0), 1.0)
        return self.gumbel_tau_start + frac * (self.gumbel_tau_end - self.gumbel_tau_start)

    def to_dict(self) -> Dict[str, Any]:
        doc = dataclasses.asdict(self)
        doc["hidden_sizes"] = list(self.hidden_sizes)
        return doc


class MaddpgTrainer:
    """Owns the networks, replay buffer, and training loop for one run."""

    def __init__(self, client: EnvClient, scenario: Dict[str, Any], config: TrainerConfig):
        config.validate()
        self.client = client
        self.scenario = dict(scenario)
        self.config = config
        if config.torch_threads is not None:
            torch.set_num_threads(config.torch_threads)
        torch.manual_seed(config.seed)
        self._sample_rng = np.random.default_rng([config.seed, 1])
        self._env_seed_rng = np.random.default_rng([config.seed, 2])
        self._eval_seed_rng = np.random.default_rng([config.seed, 3])
        self.action_table = ACTION_TABLES[config.variant]
        self.n_actions = len(self.action_table)
        self._max_rounds = expected_rounds(self.scenario)

        # Size the networks from a probe episode's first observation.
        probe = self.client.reset(self.scenario, seed=self._next_env_seed())
        self.n_agents = len(probe)
        self.obs_dims = [len(featurize(vec)) for vec in probe]
        hidden = tuple(config.hidden_sizes)
        action_dims = [self.n_actions] * self.n_agents
        self.actors = [ActorNet(d, self.n_actions, hidden) for d in self.obs_dims]
        if config.init_idle_bias:
            # Optimistic initialization for the sparse coordination reward:
            # shift the idle logit at init so early exploration favors
            # active sensing; training is free to move it back.
            idle_index = self.action_table.index(ACTION_IDLE)
            with torch.no_grad():
                for actor in self.actors:
                    actor.body[-1].bias[idle_index] += config.init_idle_bias
        self.critics = [
            CriticNet(self.obs_dims, action_dims, hidden) for _ in range(self.n_agents)
        ]
        self.target_actors = [self._clone(a) for a in self.actors]
        self.target_critics = [self._clone(c) for c in self.critics]
        self.actor_opts = [
            torch.optim.Adam(a.parameters(), lr=config.lr_actor) for a in self.actors
        ]
        self.critic_opts = [
            torch.optim.Adam(c.parameters(), lr=config.lr_critic) for c in self.critics
        ]
        self.buffer = ReplayBuffer(config.replay_capacity, self.obs_dims)
        self.curve: List[Dict[str, float]] = []
        self.eval_curve: List[Dict[str, float]] = []
        self.episodes_trained = 0
        self._best: Optional[Tuple[float, int, Dict[str, Any]]] = None

    @staticmethod
    def _clone(net: torch.nn.Module) -> torch.nn.Module:
        import copy

        twin = copy.deepcopy(net)
        for p in twin.parameters():
            p.requires_grad_(False)
        return twin

    def _next_env_seed(self) -> int:
        return int(self._env_seed_rng.integers(0, 2**31 - 1))

    # -- acting ---------------------------------------------------------------

    def _sample_actions(self, feats: List[np.ndarray], tau: float) -> List[int]:
        """Hard Gumbel-Softmax sample per agent; returns logit indices."""
        indices = []
        with torch.no_grad():
            for actor, feat in zip(self.actors, feats):
                logits = actor(torch.from_numpy(feat))
                # Hard Gumbel sampling ignores the softmax temperature, so the
                # schedule is applied to the logits: draws follow
                # softmax(logits / tau), flattening early and sharpening late.
                one_hot = F.gumbel_softmax(logits / tau, tau=1.0, hard=True)
                indices.append(int(one_hot.argmax().item()))
        return indices

    def _wire_actions(self, indices: Sequence[int]) -> List[int]:
        return [self.action_table[i] for i in indices]

    # -- learning ---------------------------------------------------------------

    def _joint(self, parts: Sequence[torch.Tensor]) -> torch.Tensor:
        return torch.cat(list(parts), dim=1)

    def _update_agent(
        self, agent: int, tau: float, update_actor: bool = True
    ) -> Tuple[float, float]:
        """One critic fit + target blend; optionally one actor ascent too.

        With ``update_actor`` false (the delayed-policy warmup phase) the
        actor and its target stay frozen, so the critic performs policy
        evaluation of the current stationary behavior.
        """
        cfg = self.config
        batch = self.buffer.sample(cfg.batch_size, self._sample_rng)
        obs = [torch.from_numpy(o) for o in batch["obs"]]
        next_obs = [torch.from_numpy(o) for o in batch["next_obs"]]
        actions = torch.from_numpy(batch["actions"])
        rewards = torch.from_numpy(batch["rewards"])
        dones = torch.from_numpy(batch["dones"])

        taken = [
            F.one_hot(actions[:, i], self.n_actions).float()
            for i in range(self.n_agents)
        ]
        joint_obs = self._joint(obs)
        joint_next_obs = self._joint(next_obs)

        with torch.no_grad():
            next_taken = [
                F.one_hot(
                    self.target_actors[i](next_obs[i]).argmax(dim=1), self.n_actions
                ).float()
                for i in range(self.n_agents)
            ]
            target_q = self.target_critics[agent](joint_next_obs, self._joint(next_taken))
            td_target = rewards + cfg.gamma * (1.0 - dones) * target_q

        critic = self.critics[agent]
        q = critic(joint_obs, self._joint(taken))
        critic_loss = F.mse_loss(q, td_target)
        self.critic_opts[agent].zero_grad()
        critic_loss.backward()
        self.critic_opts[agent].step()

        a_val = 0.0
        if update_actor:
            own_logits = self.actors[agent](obs[agent]) / tau
            own = F.gumbel_softmax(own_logits, tau=1.0, hard=True)
            pieces = [own if i == agent else taken[i] for i in range(self.n_agents)]
            actor_loss = -critic(joint_obs, self._joint(pieces)).mean()
            self.actor_opts[agent].zero_grad()
            actor_loss.backward()
            self.actor_opts[agent].step()
            a_val = float(actor_loss.item())

        c_val = float(critic_loss.item())
        if not (math.isfinite(c_val) and math.isfinite(a_val)):
            raise RuntimeError(
                f"non-finite loss for agent {agent}: critic={c_val}, actor={a_val} "
                f"(episode {self.episodes_trained})"
            )
        soft_update(self.target_critics[agent], critic, cfg.soft_update_mix)
        if update_actor:
            soft_update(self.target_actors[agent], self.actors[agent], cfg.soft_update_mix)
        return c_val, a_val

    # -- training loop ----------------------------------------------------------

    def run_episode(self, env_seed: int, tau: float) -> Tuple[float, int]:
        """Roll out one episode, storing transitions; returns (reward, rounds)."""
        raw = self.client.reset(self.scenario, seed=env_seed)
        feats = [featurize(vec) for vec in raw]
        total_reward = 0.0
        rounds = 0
        done = False
        while not done:
            indices = self._sample_actions(feats, tau)
            raw, reward, done, _info = self.client.step(self._wire_actions(indices))
            next_feats = [featurize(vec) for vec in raw]
            self.buffer.add(feats, indices, reward, next_feats, done)
            total_reward += reward
            rounds += 1
            feats = next_feats
            self._check_episode_bound(rounds, done)
        return total_reward, rounds

    def greedy_episode(self, env_seed: int) -> Tuple[float, int]:
        """Roll out one episode with argmax actions; nothing is stored."""
        raw = self.client.reset(self.scenario, seed=env_seed)
        feats = [featurize(vec) for vec in raw]
        total_reward = 0.0
        rounds = 0
        done = False
        while not done:
            with torch.no_grad():
                indices = [
                    int(actor(torch.from_numpy(feat)).argmax())
                    for actor, feat in zip(self.actors, feats)
                ]
            raw, reward, done, _info = self.client.step(self._wire_actions(indices))
            feats = [featurize(vec) for vec in raw]
            total_reward += reward
            rounds += 1
            self._check_episode_bound(rounds, done)
        return total_reward, rounds

    def _check_episode_bound(self, rounds: int, done: bool) -> None:
        """Fail loudly if the environment overruns the scenario's episode length."""
        if not done and rounds >= self._max_rounds:
            raise RuntimeError(
                f"environment protocol violation: {rounds} rounds without "
                f"done=true (scenario episode length is {self._max_rounds} rounds)"
            )

    def _snapshot(self) -> Dict[str, Any]:
        import copy

        return {
            "actors": [copy.deepcopy(a.state_dict()) for a in self.actors],
            "critics": [copy.deepcopy(c.state_dict()) for c in self.critics],
            "target_actors": [copy.deepcopy(a.state_dict()) for a in self.target_actors],
            "target_critics": [
                copy.deepcopy(c.state_dict()) for c in self.target_critics
            ],
        }

    def _run_greedy_eval(self, episode: int) -> None:
        """Score the current greedy policy; keep the best snapshot seen."""
        cfg = self.config
        etas = []
        for _ in range(cfg.eval_episodes):
            seed = int(self._eval_seed_rng.integers(0, 2**31 - 1))
            reward, rounds = self.greedy_episode(seed)
            etas.append(reward_to_coverage(reward, rounds, self.scenario))
        mean_eta = sum(etas) / len(etas)
        self.eval_curve.append({"episode": float(episode), "eta_coverage": mean_eta})
        if self._best is None or mean_eta > self._best[0]:
            self._best = (mean_eta, episode, self._snapshot())
        if cfg.progress_every is not None:
            best_eta, best_ep, _ = self._best
            print(
                f"eval at episode {episode}: greedy eta-coverage {mean_eta:.4f} "
                f"(best {best_eta:.4f} at episode {best_ep})",
                file=sys.stderr,
                flush=True,
            )

    def train(self) -> List[Dict[str, float]]:
        """Run the configured number of episodes; returns the training curve.

        Curve rows carry the episode index, the episode's covered-slot
        share (the target-met indicator averaged over slots), and the raw
        episode reward.
        """
        cfg = self.config
        if cfg.progress_every is not None:
            print(
                f"begin variant={cfg.variant} episodes={cfg.episodes} "
                f"agents={self.n_agents} actions={self.n_actions}",
                file=sys.stderr,
                flush=True,
            )
        for episode in range(cfg.episodes):
            tau = cfg.gumbel_tau(episode)
            reward, rounds = self.run_episode(self._next_env_seed(), tau)
            can_update = (
                cfg.updates_per_episode > 0
                and episode >= cfg.warmup_episodes
                and len(self.buffer) >= cfg.batch_size
            )
            if can_update:
                update_actor = episode >= cfg.actor_warmup_episodes
                for _ in range(cfg.updates_per_episode):
                    for agent in range(self.n_agents):
                        self._update_agent(agent, tau, update_actor)
            self.curve.append(
                {
                    "episode": float(episode),
                    "eta_coverage": reward_to_coverage(reward, rounds, self.scenario),
                    "reward": reward,
                }
            )
            self.episodes_trained = episode + 1
            every = cfg.progress_every
            if every is not None and (episode + 1) % every == 0:
                window = self.curve[-every:]
                mean_eta = sum(r["eta_coverage"] for r in window) / len(window)
                print(
                    f"episode {episode + 1}/{cfg.episodes} "
                    f"window eta-coverage {mean_eta:.4f} tau {tau:.2f}",
                    file=sys.stderr,
                    flush=True,
                )
            if cfg.eval_every is not None and (episode + 1) % cfg.eval_every == 0:
                self._run_greedy_eval(episode + 1)
        return self.curve

    # -- persistence --------------------------------------------------------------

    def manifest(self) -> Dict[str, Any]:
        return {
            "format": "maddpg-trainer-checkpoint-v1",
            "variant": self.config.variant,
            "action_table": list(self.action_table),
            "n_agents": self.n_agents,
            "obs_dims": list(self.obs_dims),
            "hidden_sizes": list(self.config.hidden_sizes),
            "feature_scales": dict(FEATURE_SCALES),
            "trainer_config": self.config.to_dict(),
            "scenario": self.scenario,
            "episodes_trained": self.episodes_trained,
            "selection": self._selection_info(),
            "versions": {
                "torch": torch.__version__,
                "numpy": np.__version__,
            },
        }

    def _selection_info(self) -> Dict[str, Any]:
        """Which weights the checkpoint carries: final, or best greedy eval."""
        if self._best is None:
            return {"policy": "final"}
        best_eta, best_episode, _ = self._best
        return {
            "policy": "best-greedy-eval",
            "episode": best_episode,
            "eta_coverage": best_eta,
            "eval_episodes": self.config.eval_episodes,
        }

    def save_checkpoint(self, out_dir: str) -> None:
        """Write a self-describing checkpoint directory (manifest + weights).

        With periodic greedy evaluation enabled the saved weights are the
        best-evaluated snapshot (the manifest's ``selection`` block says
        which episode); otherwise they are the final ones.
        """
        import json
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if self._best is not None:
            weights = dict(self._best[2])
        else:
            weights = {
                "actors": [a.state_dict() for a in self.actors],
                "critics": [c.state_dict() for c in self.critics],
                "target_actors": [a.state_dict() for a in self.target_actors],
                "target_critics": [c.state_dict() for c in self.target_critics],
            }
        torch.save(weights, os.path.join(out_dir, "weights.pt"))
