"""Battleship solitaire: sink a hidden fleet on an n-by-n board.

Each shot costs -1 and may not repeat a cell (the action mask enforces this);
hitting the last remaining ship cell adds +100 and ends the episode, so a game
finished in T shots returns 100 - T. The fleet (lengths 5/4/3/2 on the default
10-by-10 board) is placed uniformly at random over all axis-aligned,
non-overlapping, fully on-board configurations by joint rejection sampling.
Ships may touch unless the config forbids it.

Observation layouts:
  Partial       (n^2 + 1): [last_shot_hit] ++ one-hot(last cell fired)
  PerfectMemory (2 n^2):   hit grid ++ miss grid, everything seen so far
  FullState     (3 n^2):   PerfectMemory ++ the hidden ship-cell grid
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core import (
    Capabilities,
    ConfigError,
    ContractError,
    ObservabilityLevel,
    RngStream,
    StepResult,
)
from .base import Environment

logger = logging.getLogger(__name__)

_LEVELS = (
    ObservabilityLevel.PARTIAL,
    ObservabilityLevel.PERFECT_MEMORY,
    ObservabilityLevel.FULL_STATE,
)


@dataclass(frozen=True)
class BattleshipConfig:
    n: int = 10
    ship_lengths: tuple[int, ...] = (5, 4, 3, 2)
    allow_touching: bool = True
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"board size must be >= 2, got {self.n}")
        if not self.ship_lengths:
            raise ConfigError("need at least one ship")
        for L in self.ship_lengths:
            if not 2 <= L <= self.n:
                raise ConfigError(f"ship length {L} does not fit a {self.n}x{self.n} board")
        if sum(self.ship_lengths) >= self.n * self.n:
            raise ConfigError("fleet does not leave a free cell on the board")

    @property
    def total_ship_cells(self) -> int:
        return sum(self.ship_lengths)

    def capabilities(self) -> Capabilities:
        cells = self.n * self.n
        return Capabilities(
            levels=_LEVELS,
            obs_dims={
                ObservabilityLevel.PARTIAL: cells + 1,
                ObservabilityLevel.PERFECT_MEMORY: 2 * cells,
                ObservabilityLevel.FULL_STATE: 3 * cells,
            },
            action_dim=cells,
            reward_range=(-1.0, 99.0),
            gamma=self.gamma,
            max_steps=cells,
        )


def _sample_ship(n: int, length: int, rng: RngStream) -> list[int]:
    """Uniform placement of one ship; returns flat cell indices."""
    span = n - length + 1
    per_orient = n * span
    idx = rng.randint(2 * per_orient)
    if idx < per_orient:  # horizontal
        row, col = divmod(idx, span)
        return [row * n + col + j for j in range(length)]
    idx -= per_orient  # vertical
    col, row = divmod(idx, span)
    return [(row + j) * n + col for j in range(length)]


def _touches(cells_a: list[int], occupied: np.ndarray, n: int) -> bool:
    for cell in cells_a:
        r, c = divmod(cell, n)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if 0 <= rr < n and 0 <= cc < n and occupied[rr * n + cc]:
                    return True
    return False


def place_ships(config: BattleshipConfig, rng: RngStream) -> np.ndarray:
    """Flat boolean ship-cell grid, uniform over legal fleet configurations.

    All ships are resampled together until they are jointly legal, which keeps
    the distribution uniform (per-ship retries would bias toward the placements
    of the ships drawn first).
    """
    n = config.n
    while True:
        grid = np.zeros(n * n, dtype=np.bool_)
        ok = True
        for length in config.ship_lengths:
            cells = _sample_ship(n, length, rng)
            if any(grid[c] for c in cells):
                ok = False
                break
            if not config.allow_touching and _touches(cells, grid, n):
                ok = False
                break
            grid[cells] = True
        if ok:
            return grid


class BattleshipEnv(Environment):
    def __init__(self, config: BattleshipConfig, level: ObservabilityLevel):
        super().__init__(config, level)
        self.n = config.n
        cells = config.n * config.n
        self.ship = np.zeros(cells, dtype=np.bool_)
        self.fired = np.zeros(cells, dtype=np.bool_)
        self.hits_remaining = 0
        self.last_action = -1
        self.last_hit = False
        self.steps = 0

    def reset(self, rng: RngStream) -> np.ndarray:
        self.ship = place_ships(self.config, rng)
        self.fired[:] = False
        self.hits_remaining = self.config.total_ship_cells
        self.last_action = -1
        self.last_hit = False
        self.steps = 0
        self._done = False
        return self.observe()

    def step(self, action: int, rng: RngStream) -> StepResult:
        self._require_live()
        if not 0 <= action < self.action_dim:
            raise ContractError(f"cell index {action} out of range")
        if self.fired[action]:
            raise ContractError(f"cell {action} was already fired at")

        self.fired[action] = True
        self.last_action = action
        self.last_hit = bool(self.ship[action])
        reward = -1.0
        terminated = False
        if self.last_hit:
            self.hits_remaining -= 1
            if self.hits_remaining == 0:
                reward += 100.0
                terminated = True

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
        cells = self.n * self.n
        if level is ObservabilityLevel.PARTIAL:
            obs = np.zeros(cells + 1, dtype=np.float64)
            if self.last_action >= 0:
                obs[0] = 1.0 if self.last_hit else 0.0
                obs[1 + self.last_action] = 1.0
            return obs
        hit = (self.fired & self.ship).astype(np.float64)
        miss = (self.fired & ~self.ship).astype(np.float64)
        if level is ObservabilityLevel.PERFECT_MEMORY:
            return np.concatenate([hit, miss])
        if level is ObservabilityLevel.FULL_STATE:
            return np.concatenate([hit, miss, self.ship.astype(np.float64)])
        raise ConfigError(f"unhandled level {level}")

    def action_mask(self) -> np.ndarray:
        return ~self.fired


def belief_ceiling_player(
    pm_obs: np.ndarray,
    config: BattleshipConfig,
    rng: RngStream,
    n_samples: int = 200,
    max_attempts: int | None = None,
) -> int:
    """Greedy shot from a Monte-Carlo posterior over fleet placements.

    Takes the PerfectMemory observation (hit grid ++ miss grid), samples up to
    n_samples placements consistent with it by rejection, and fires at the
    unfired cell most often occupied; ties go to the lowest cell index. If the
    attempt budget yields no consistent placement the choice falls back to a
    uniform random legal cell (and the event is logged: it means the sampler,
    not the game, is exhausted).
    """
    cells = config.n * config.n
    hit = pm_obs[:cells] > 0.5
    miss = pm_obs[cells : 2 * cells] > 0.5
    legal = ~(hit | miss)
    if not legal.any():
        raise ContractError("no legal cell left to fire at")

    if max_attempts is None:
        max_attempts = 50 * n_samples
    counts = np.zeros(cells, dtype=np.int64)
    found = 0
    for _ in range(max_attempts):
        if found >= n_samples:
            break
        grid = place_ships(config, rng)
        if (hit & ~grid).any() or (miss & grid).any():
            continue
        counts += grid
        found += 1

    if found == 0:
        logger.warning("belief player found no consistent placement; firing uniformly")
        legal_idx = np.flatnonzero(legal)
        return int(legal_idx[rng.randint(len(legal_idx))])

    scores = np.where(legal, counts, -1)
    return int(np.argmax(scores))
