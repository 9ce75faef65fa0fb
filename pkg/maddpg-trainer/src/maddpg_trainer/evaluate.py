"""Greedy-policy evaluation of a saved checkpoint against a live environment."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import torch

from .nets import ActorNet
from .protocol import EnvClient
from .trainer import (
    ACTION_IDLE,
    ACTION_EDGE,
    expected_rounds,
    featurize,
    reward_to_coverage,
)

__all__ = ["Checkpoint", "EvalResult", "evaluate", "load_checkpoint"]


@dataclass
class Checkpoint:
    """A loaded policy: manifest metadata plus frozen actor networks."""

    manifest: Dict[str, Any]
    actors: List[ActorNet]

    @property
    def action_table(self) -> List[int]:
        return [int(a) for a in self.manifest["action_table"]]

    @property
    def scenario(self) -> Dict[str, Any]:
        return self.manifest["scenario"]

    @property
    def n_agents(self) -> int:
        return int(self.manifest["n_agents"])


@dataclass
class EvalResult:
    """Aggregate metrics over the evaluation episodes.

    ``p_c_hat`` is the share of slots meeting the coverage target;
    ``sensing_ratio`` and ``ec_ratio`` are shares of agent-round
    decisions that sense at all and that offload, respectively;
    ``mean_sink_aoi`` averages each agent's own sink-side age (in slots)
    over round boundaries where it is known; ``mean_coverage`` averages
    the per-round mean covered area share.
    """

    episodes: int
    rounds: int
    p_c_hat: float
    sensing_ratio: float
    ec_ratio: float
    mean_sink_aoi: float
    mean_coverage: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "episodes": self.episodes,
            "rounds": self.rounds,
            "p_c_hat": self.p_c_hat,
            "sensing_ratio": self.sensing_ratio,
            "ec_ratio": self.ec_ratio,
            "mean_sink_aoi": self.mean_sink_aoi,
            "mean_coverage": self.mean_coverage,
        }


def load_checkpoint(path: str) -> Checkpoint:
    """Load a checkpoint directory: manifest.json + weights.pt."""
    with open(os.path.join(path, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    expected = "maddpg-trainer-checkpoint-v1"
    if manifest.get("format") != expected:
        raise ValueError(
            f"unsupported checkpoint format {manifest.get('format')!r}; expected {expected!r}"
        )
    weights = torch.load(os.path.join(path, "weights.pt"), map_location="cpu")
    hidden = tuple(manifest["hidden_sizes"])
    n_actions = len(manifest["action_table"])
    actors: List[ActorNet] = []
    for dim, state in zip(manifest["obs_dims"], weights["actors"]):
        actor = ActorNet(int(dim), n_actions, hidden)
        actor.load_state_dict(state)
        actor.eval()
        for p in actor.parameters():
            p.requires_grad_(False)
        actors.append(actor)
    return Checkpoint(manifest=manifest, actors=actors)


def _greedy_actions(checkpoint: Checkpoint, feats: List[np.ndarray]) -> List[int]:
    table = checkpoint.action_table
    wire = []
    with torch.no_grad():
        for actor, feat in zip(checkpoint.actors, feats):
            idx = int(actor(torch.from_numpy(feat)).argmax().item())
            wire.append(table[idx])
    return wire


def evaluate(
    client: EnvClient,
    checkpoint: Checkpoint,
    episodes: int,
    seed: int = 0,
    scenario: Optional[Dict[str, Any]] = None,
) -> EvalResult:
    """Run greedy episodes and aggregate coverage/decision/age metrics.

    Episodes are seeded ``seed, seed+1, ...`` so results are reproducible;
    the scenario defaults to the one recorded in the checkpoint.
    """
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    doc = checkpoint.scenario if scenario is None else scenario
    max_rounds = expected_rounds(doc)
    total_reward = 0.0
    total_rounds = 0
    decisions = 0
    sensed = 0
    offloaded = 0
    sink_age_sum = 0.0
    sink_age_count = 0
    coverage_sum = 0.0

    for ep in range(episodes):
        raw = client.reset(doc, seed=seed + ep)
        feats = [featurize(vec) for vec in raw]
        done = False
        ep_rounds = 0
        while not done:
            wire = _greedy_actions(checkpoint, feats)
            raw, reward, done, info = client.step(wire)
            feats = [featurize(vec) for vec in raw]
            total_reward += reward
            total_rounds += 1
            ep_rounds += 1
            if not done and ep_rounds >= max_rounds:
                raise RuntimeError(
                    f"environment protocol violation: {ep_rounds} rounds without "
                    f"done=true (scenario episode length is {max_rounds} rounds)"
                )
            coverage_sum += float(info["coverage_mean"])
            for action in wire:
                decisions += 1
                if action != ACTION_IDLE:
                    sensed += 1
                if action == ACTION_EDGE:
                    offloaded += 1
            for vec in raw:
                own_sink_age = vec[1]
                if own_sink_age is not None:
                    sink_age_sum += float(own_sink_age)
                    sink_age_count += 1

    return EvalResult(
        episodes=episodes,
        rounds=total_rounds,
        p_c_hat=reward_to_coverage(total_reward, total_rounds, doc),
        sensing_ratio=sensed / decisions if decisions else 0.0,
        ec_ratio=offloaded / decisions if decisions else 0.0,
        mean_sink_aoi=sink_age_sum / sink_age_count if sink_age_count else float("inf"),
        mean_coverage=coverage_sum / total_rounds if total_rounds else 0.0,
    )
