"""RockSample(n, k): navigate an n-by-n grid, sample good rocks, exit east.

Rocks are placed uniformly without replacement and are independently good or
bad with probability 1/2. A noisy sensor checks any rock from a distance; its
accuracy decays with Euclidean distance d as 1/2 * (1 + 2^(-d / max_d)) where
max_d is the largest distance realizable on the grid, sqrt(2) * (n - 1).

Observation layout (2n + k): one-hot row ++ one-hot col ++ one sensor bit per
rock. Under Partial the sensor bits reflect only the immediately preceding
check or sample (they clear on every other step); under PerfectMemory each bit
latches the most recent reading ever taken for that rock.

Conventions the literature leaves implicit, fixed here: the agent starts at
(ceil(n/2) - 1, 0); stepping East off the east edge terminates with +10;
sampling turns a good rock bad, so re-sampling pays -10.
"""
from __future__ import annotations

import math
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

NORTH, SOUTH, EAST, WEST, SAMPLE = 0, 1, 2, 3, 4
CHECK_BASE = 5  # Check_i = CHECK_BASE + i


def sensor_accuracy(d: float, max_d: float) -> float:
    """Probability the sensor reports a rock's true parity from distance d."""
    if d < 0:
        raise ConfigError(f"distance must be nonnegative, got {d}")
    if max_d <= 0:
        raise ConfigError(f"max_d must be positive, got {max_d}")
    return 0.5 * (1.0 + 2.0 ** (-d / max_d))


@dataclass(frozen=True)
class RockSampleConfig:
    n: int
    k: int
    gamma: float = 0.99
    max_steps: int = 1000

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"grid size must be >= 2, got {self.n}")
        if self.k < 1 or self.k > self.n * self.n:
            raise ConfigError(f"need 1 <= k <= n*n rocks, got k={self.k} for n={self.n}")

    @property
    def max_d(self) -> float:
        return math.sqrt(2.0) * (self.n - 1)

    def capabilities(self) -> Capabilities:
        levels = (ObservabilityLevel.PARTIAL, ObservabilityLevel.PERFECT_MEMORY)
        return Capabilities(
            levels=levels,
            obs_dims={lv: 2 * self.n + self.k for lv in levels},
            action_dim=5 + self.k,
            reward_range=(-10.0, 10.0),
            gamma=self.gamma,
            max_steps=self.max_steps,
        )


class RockSampleEnv(Environment):
    def __init__(self, config: RockSampleConfig, level: ObservabilityLevel):
        super().__init__(config, level)
        self.n = config.n
        self.k = config.k
        self.row = 0
        self.col = 0
        self.rock_pos: list[tuple[int, int]] = []
        self.rock_good = np.zeros(config.k, dtype=np.bool_)
        self.rock_collected = np.zeros(config.k, dtype=np.bool_)
        self.pulse_sensor = np.zeros(config.k, dtype=np.float64)
        self.latched_sensor = np.zeros(config.k, dtype=np.float64)
        self.steps = 0

    def reset(self, rng: RngStream) -> np.ndarray:
        n, k = self.n, self.k
        self.row = (n + 1) // 2 - 1  # ceil(n/2) - 1
        self.col = 0
        cells = rng.sample_distinct(n * n, k)
        self.rock_pos = [(c // n, c % n) for c in cells]
        self.rock_good = np.array([rng.bernoulli(0.5) for _ in range(k)], dtype=np.bool_)
        self.rock_collected[:] = False
        self.pulse_sensor[:] = 0.0
        self.latched_sensor[:] = 0.0
        self.steps = 0
        self._done = False
        return self.observe()

    def _sense(self, i: int, rng: RngStream) -> None:
        rock_r, rock_c = self.rock_pos[i]
        d = math.hypot(self.row - rock_r, self.col - rock_c)
        acc = sensor_accuracy(d, self.config.max_d)
        truth = bool(self.rock_good[i])
        bit = truth if rng.bernoulli(acc) else not truth
        self.pulse_sensor[i] = 1.0 if bit else 0.0
        self.latched_sensor[i] = 1.0 if bit else 0.0

    def step(self, action: int, rng: RngStream) -> StepResult:
        self._require_live()
        self.pulse_sensor[:] = 0.0
        reward = 0.0
        terminated = False

        if action == NORTH:
            self.row = max(self.row - 1, 0)
        elif action == SOUTH:
            self.row = min(self.row + 1, self.n - 1)
        elif action == WEST:
            self.col = max(self.col - 1, 0)
        elif action == EAST:
            if self.col == self.n - 1:
                reward = 10.0
                terminated = True
            else:
                self.col += 1
        elif action == SAMPLE:
            here = (self.row, self.col)
            idx = next((i for i, p in enumerate(self.rock_pos) if p == here), None)
            if idx is None:
                reward = -10.0
            else:
                if self.rock_good[idx]:
                    reward = 10.0
                    self.rock_good[idx] = False  # a harvested rock is bad from now on
                else:
                    reward = -10.0
                self.rock_collected[idx] = True
                # the sampler reads the rock directly: post-sample parity, noise-free
                self.pulse_sensor[idx] = 1.0 if self.rock_good[idx] else 0.0
                self.latched_sensor[idx] = self.pulse_sensor[idx]
        else:
            rock_i = action - CHECK_BASE
            if not 0 <= rock_i < self.k:
                raise ConfigError(f"action {action} out of range for k={self.k}")
            self._sense(rock_i, rng)

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
        obs = np.zeros(2 * self.n + self.k, dtype=np.float64)
        obs[self.row] = 1.0
        obs[self.n + self.col] = 1.0
        if level is ObservabilityLevel.PARTIAL:
            obs[2 * self.n :] = self.pulse_sensor
        else:
            obs[2 * self.n :] = self.latched_sensor
        return obs

    def action_mask(self) -> np.ndarray:
        return np.ones(5 + self.k, dtype=np.bool_)
