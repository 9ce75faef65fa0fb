"""Shared fixtures: spawning a real environment server for protocol tests."""

from __future__ import annotations

import pytest
import torch

from maddpg_trainer import EnvClient

from envsupport import env_command


@pytest.fixture()
def env_client():
    with EnvClient.spawn(env_command()) as client:
        yield client


@pytest.fixture(autouse=True)
def _single_thread_torch():
    torch.set_num_threads(1)
    yield
