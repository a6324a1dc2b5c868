"""T-Maze(n): a corridor whose first cell reveals which junction arm pays out.

Cells are indexed by x: 0 is the start, 1..n the corridor, n+1 the junction.
Only East advances x; every other blocked move is a zero-reward no-op. At the
junction, North or South ends the episode with +4 on the rewarded side and
-0.1 on the other. The rewarded side is shown only in the start cell under
partial observability, so solving the maze requires carrying one bit for n+1
steps.

Observation layout (4 bits): [reward_up, reward_down, in_corridor, at_junction].
FullState keeps the first two bits set everywhere; Partial sets them only at
the start cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    Capabilities,
    ConfigError,
    ObservabilityLevel,
    RngStream,
    StepResult,
)
from .base import Environment

NORTH, SOUTH, EAST, WEST = 0, 1, 2, 3
ACTION_NAMES = ("north", "south", "east", "west")

REWARD_CORRECT = 4.0
REWARD_WRONG = -0.1


@dataclass(frozen=True)
class TMazeConfig:
    n: int
    gamma: float = 0.99

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"tmaze corridor length must be >= 1, got {self.n}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")

    def capabilities(self) -> Capabilities:
        levels = (ObservabilityLevel.PARTIAL, ObservabilityLevel.FULL_STATE)
        return Capabilities(
            levels=levels,
            obs_dims={lv: 4 for lv in levels},
            action_dim=4,
            reward_range=(REWARD_WRONG, REWARD_CORRECT),
            gamma=self.gamma,
            max_steps=10 * (self.n + 2),
        )


class TMazeEnv(Environment):
    def __init__(self, config: TMazeConfig, level: ObservabilityLevel):
        super().__init__(config, level)
        self.n = config.n
        self.reward_up = False
        self.x = 0
        self.steps = 0

    def reset(self, rng: RngStream) -> np.ndarray:
        self.reward_up = rng.bernoulli(0.5)
        self.x = 0
        self.steps = 0
        self._done = False
        return self.observe()

    def step(self, action: int, rng: RngStream) -> StepResult:
        self._require_live()
        reward = 0.0
        terminated = False
        junction = self.x == self.n + 1

        if junction and action in (NORTH, SOUTH):
            wants_up = action == NORTH
            reward = REWARD_CORRECT if wants_up == self.reward_up else REWARD_WRONG
            terminated = True
        elif action == EAST and not junction:
            self.x += 1
        # every other move is blocked by a wall: position unchanged, reward 0

        self.steps += 1
        truncated = not terminated and self.steps >= self.max_steps
        self._done = terminated or truncated
        return StepResult(
            obs=self.observe(),
            reward=reward,
            terminated=terminated,
            truncated=truncated,
            mask=self.action_mask(),
        )

    def observe(self, level: ObservabilityLevel | None = None) -> np.ndarray:
        if level is None:
            level = self.level
        self.config.capabilities().require(level)
        obs = np.zeros(4, dtype=np.float64)
        at_start = self.x == 0
        if at_start or level is ObservabilityLevel.FULL_STATE:
            obs[0 if self.reward_up else 1] = 1.0
        if 0 < self.x <= self.n:
            obs[2] = 1.0
        elif self.x == self.n + 1:
            obs[3] = 1.0
        return obs

    def action_mask(self) -> np.ndarray:
        return np.ones(4, dtype=np.bool_)
