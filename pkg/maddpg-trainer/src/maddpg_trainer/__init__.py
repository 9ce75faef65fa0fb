"""Multi-agent DDPG trainer for the freshness-coverage environment protocol.

The trainer talks to the environment exclusively through its line-delimited
JSON protocol (a spawned ``freshcov serve-env`` process or a TCP endpoint),
trains one actor-critic pair per sensor with a shared replay buffer and
centralized critics, and can freeze the result into a self-describing
checkpoint directory for greedy evaluation.
"""

from .evaluate import Checkpoint, EvalResult, evaluate, load_checkpoint
from .nets import ActorNet, CriticNet, soft_update
from .protocol import EnvClient, EnvDiedError, EnvProtocolError
from .replay import ReplayBuffer
from .trainer import (
    ACTION_TABLES,
    FEATURE_SCALES,
    MaddpgTrainer,
    TrainerConfig,
    featurize,
    reward_to_coverage,
)

__all__ = [
    "ACTION_TABLES",
    "ActorNet",
    "Checkpoint",
    "CriticNet",
    "EnvClient",
    "EnvDiedError",
    "EnvProtocolError",
    "EvalResult",
    "FEATURE_SCALES",
    "MaddpgTrainer",
    "ReplayBuffer",
    "TrainerConfig",
    "evaluate",
    "featurize",
    "load_checkpoint",
    "reward_to_coverage",
    "soft_update",
]

__version__ = "0.1.0"
