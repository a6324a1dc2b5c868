"""Shared fixtures: a two-armed deterministic bandit used as a learning
sanity check, and small helpers for driving environments from tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from memgap import (
    Capabilities,
    Environment,
    ObservabilityLevel,
    RngStream,
    StepResult,
    register_env,
)


@dataclass(frozen=True)
class BanditConfig:
    """Two actions, one step per episode: arm 0 pays 1, arm 1 pays 0."""

    gamma: float = 0.99

    def capabilities(self) -> Capabilities:
        return Capabilities(
            levels=(ObservabilityLevel.PARTIAL,),
            obs_dims={ObservabilityLevel.PARTIAL: 1},
            action_dim=2,
            reward_range=(0.0, 1.0),
            gamma=self.gamma,
            max_steps=1,
        )


class BanditEnv(Environment):
    def reset(self, rng: RngStream) -> np.ndarray:
        self._done = False
        return self.observe()

    def step(self, action: int, rng: RngStream) -> StepResult:
        self._require_live()
        self._done = True
        return StepResult(
            obs=self.observe(),
            reward=1.0 if action == 0 else 0.0,
            terminated=True,
            truncated=False,
            mask=self.action_mask(),
        )

    def observe(self, level: ObservabilityLevel | None = None) -> np.ndarray:
        return np.zeros(1)

    def action_mask(self) -> np.ndarray:
        return np.ones(2, dtype=np.bool_)


register_env(BanditConfig, BanditEnv)


@pytest.fixture
def bandit_config() -> BanditConfig:
    return BanditConfig()


def run_scripted_episode(env: Environment, actions, rng: RngStream):
    """Drive one fresh episode with a fixed action sequence; returns
    (rewards, step_results)."""
    env.reset(rng)
    rewards = []
    results = []
    for action in actions:
        result = env.step(int(action), rng)
        rewards.append(result.reward)
        results.append(result)
        if result.terminated or result.truncated:
            break
    return rewards, results
