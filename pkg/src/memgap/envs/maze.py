"""First-person grid mazes: turn-and-step navigation toward a random goal.

Layouts are ASCII text, '#' for wall and '.' for free, with a fully walled
border and a connected free region. Start cell, goal cell, and initial facing
are re-sampled every episode. Forward into a wall is a no-op; reaching the
goal pays +1 and ends the episode.

Partial observation: the 2x3 patch directly in front of the agent, two rows
deep and three cells wide, nearest row adjacent to the agent, the agent's own
cell excluded. Cells are ordered (depth, left-to-right from the agent's point
of view) with two channels (wall, goal), flattened to 12 values; anything off
the map reads as wall:

        . . .      depth 1 (cells 3, 4, 5)
        . . .      depth 0 (cells 0, 1, 2)
          A        agent, facing up

FullState observation: an agent-centered window of size (2h-1, 2w-1, 6),
channels (wall, goal, facing one-hot x4) with the facing channels broadcast
to every cell, flattened; off-map cells again read as wall.
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

FORWARD, TURN_LEFT, TURN_RIGHT = 0, 1, 2

# facing index -> (dr, dc); turning right increments the index
_N, _E, _S, _W = 0, 1, 2, 3
_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True)
class MazeLayout:
    id: str
    height: int
    width: int
    walls: np.ndarray  # (h, w) bool, read-only
    free_cells: tuple[tuple[int, int], ...]  # row-major order

    def is_wall(self, r: int, c: int) -> bool:
        """Treats everything outside the map as wall."""
        if 0 <= r < self.height and 0 <= c < self.width:
            return bool(self.walls[r, c])
        return True


def load_layout(text: str, layout_id: str = "custom") -> MazeLayout:
    """Parse and validate an ASCII maze. Raises ConfigError with row/col info."""
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ConfigError("empty maze layout")
    width = len(rows[0])
    for r, line in enumerate(rows):
        if len(line) != width:
            raise ConfigError(f"ragged maze: row {r} has length {len(line)}, expected {width}")
        for c, ch in enumerate(line):
            if ch not in "#.":
                raise ConfigError(f"bad character {ch!r} at row {r}, col {c} (only '#' and '.')")
    height = len(rows)
    walls = np.array([[ch == "#" for ch in line] for line in rows], dtype=np.bool_)

    for c in range(width):
        if not walls[0, c]:
            raise ConfigError(f"border not walled at row 0, col {c}")
        if not walls[height - 1, c]:
            raise ConfigError(f"border not walled at row {height - 1}, col {c}")
    for r in range(height):
        if not walls[r, 0]:
            raise ConfigError(f"border not walled at row {r}, col 0")
        if not walls[r, width - 1]:
            raise ConfigError(f"border not walled at row {r}, col {width - 1}")

    free = np.argwhere(~walls)
    if len(free) < 2:
        raise ConfigError(f"maze needs at least 2 free cells, found {len(free)}")

    # flood fill from the first free cell; every free cell must be reachable
    seen = np.zeros_like(walls)
    stack = [tuple(free[0])]
    seen[free[0][0], free[0][1]] = True
    while stack:
        r, c = stack.pop()
        for dr, dc in _DELTAS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width and not walls[rr, cc] and not seen[rr, cc]:
                seen[rr, cc] = True
                stack.append((rr, cc))
    unreachable = np.argwhere(~walls & ~seen)
    if len(unreachable):
        r, c = unreachable[0]
        raise ConfigError(f"free region disconnected: cell at row {r}, col {c} unreachable")

    walls.setflags(write=False)
    free_cells = tuple((int(r), int(c)) for r, c in free)
    return MazeLayout(id=layout_id, height=height, width=width, walls=walls, free_cells=free_cells)


@dataclass(frozen=True)
class MazeConfig:
    layout: MazeLayout
    max_steps: int
    gamma: float = 0.99

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")

    def capabilities(self) -> Capabilities:
        h, w = self.layout.height, self.layout.width
        return Capabilities(
            levels=(ObservabilityLevel.PARTIAL, ObservabilityLevel.FULL_STATE),
            obs_dims={
                ObservabilityLevel.PARTIAL: 12,
                ObservabilityLevel.FULL_STATE: (2 * h - 1) * (2 * w - 1) * 6,
            },
            action_dim=3,
            reward_range=(0.0, 1.0),
            gamma=self.gamma,
            max_steps=self.max_steps,
        )


def _front_window(r: int, c: int, facing: int) -> list[tuple[int, int]]:
    """The six (row, col) cells of the 2x3 front patch, depth-major,
    left-to-right from the agent's perspective."""
    dr, dc = _DELTAS[facing]
    # left of the agent = facing rotated counterclockwise
    lr, lc = _DELTAS[(facing - 1) % 4]
    cells = []
    for depth in (1, 2):
        base_r, base_c = r + depth * dr, c + depth * dc
        for side in (1, 0, -1):  # left, center, right
            cells.append((base_r + side * lr, base_c + side * lc))
    return cells


class MazeEnv(Environment):
    def __init__(self, config: MazeConfig, level: ObservabilityLevel):
        super().__init__(config, level)
        self.layout = config.layout
        self.row = 0
        self.col = 0
        self.facing = _N
        self.goal = (0, 0)
        self.steps = 0

    def reset(self, rng: RngStream) -> np.ndarray:
        free = self.layout.free_cells
        start_i = rng.randint(len(free))
        goal_i = rng.randint(len(free) - 1)
        if goal_i >= start_i:
            goal_i += 1
        self.row, self.col = free[start_i]
        self.goal = free[goal_i]
        self.facing = rng.randint(4)
        self.steps = 0
        self._done = False
        return self.observe()

    def step(self, action: int, rng: RngStream) -> StepResult:
        self._require_live()
        reward = 0.0
        terminated = False
        if action == TURN_LEFT:
            self.facing = (self.facing - 1) % 4
        elif action == TURN_RIGHT:
            self.facing = (self.facing + 1) % 4
        elif action == FORWARD:
            dr, dc = _DELTAS[self.facing]
            rr, cc = self.row + dr, self.col + dc
            if not self.layout.is_wall(rr, cc):
                self.row, self.col = rr, cc
                if (rr, cc) == self.goal:
                    reward = 1.0
                    terminated = True
        else:
            raise ConfigError(f"action {action} out of range for maze (0..2)")

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
        if level is ObservabilityLevel.PARTIAL:
            obs = np.zeros(12, dtype=np.float64)
            for i, (r, c) in enumerate(_front_window(self.row, self.col, self.facing)):
                obs[2 * i] = 1.0 if self.layout.is_wall(r, c) else 0.0
                obs[2 * i + 1] = 1.0 if (r, c) == self.goal else 0.0
            return obs

        h, w = self.layout.height, self.layout.width
        grid = np.zeros((2 * h - 1, 2 * w - 1, 6), dtype=np.float64)
        grid[:, :, 0] = 1.0  # off-map defaults to wall
        r0 = h - 1 - self.row
        c0 = w - 1 - self.col
        grid[r0 : r0 + h, c0 : c0 + w, 0] = self.layout.walls
        grid[r0 + self.goal[0], c0 + self.goal[1], 1] = 1.0
        grid[:, :, 2 + self.facing] = 1.0
        return grid.ravel()

    def action_mask(self) -> np.ndarray:
        return np.ones(3, dtype=np.bool_)
