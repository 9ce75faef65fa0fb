"""Actor and critic networks plus the target-network soft update."""

from __future__ import annotations

from typing import Sequence

import torch
import torch.nn as nn


def _mlp(in_dim: int, hidden: Sequence[int], out_dim: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    prev = in_dim
    for width in hidden:
        layers.append(nn.Linear(prev, width))
        layers.append(nn.ReLU())
        prev = width
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


class ActorNet(nn.Module):
    """Maps one agent's observation to unnormalized action logits."""

    def __init__(self, obs_dim: int, n_actions: int, hidden: Sequence[int] = (64, 64)):
        super().__init__()
        self.obs_dim = int(obs_dim)
        self.n_actions = int(n_actions)
        self.body = _mlp(self.obs_dim, hidden, self.n_actions)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.body(obs)


class CriticNet(nn.Module):
    """Centralized action-value head over joint observations and actions.

    Input is the concatenation of every agent's observation followed by
    every agent's one-hot action; output is a single Q value.
    """

    def __init__(
        self,
        obs_dims: Sequence[int],
        action_dims: Sequence[int],
        hidden: Sequence[int] = (64, 64),
    ):
        super().__init__()
        self.obs_dims = [int(d) for d in obs_dims]
        self.action_dims = [int(d) for d in action_dims]
        in_dim = sum(self.obs_dims) + sum(self.action_dims)
        self.body = _mlp(in_dim, hidden, 1)

    def forward(self, joint_obs: torch.Tensor, joint_actions: torch.Tensor) -> torch.Tensor:
        return self.body(torch.cat([joint_obs, joint_actions], dim=-1)).squeeze(-1)


@torch.no_grad()
def soft_update(target: nn.Module, online: nn.Module, mix: float) -> None:
    """Move each target parameter a fraction ``mix`` toward the online value."""
    if not 0.0 < mix <= 1.0:
        raise ValueError("mix must lie in (0, 1]")
    for t_param, o_param in zip(target.parameters(), online.parameters()):
        t_param.mul_(1.0 - mix).add_(o_param, alpha=mix)
    for t_buf, o_buf in zip(target.buffers(), online.buffers()):
        t_buf.copy_(o_buf)
