"""Batched stepping of N environment instances with auto-reset.

Instance i draws from its own counter-based stream (stream_id=i under the
batch seed), so a batched trajectory is bit-identical to driving a standalone
instance with the same stream, and results never depend on how many workers
share the stepping loop: workers own disjoint instance ranges and write to
disjoint buffer rows.

Auto-reset contract: when an episode ends inside step(), the returned row
holds the *next* episode's first observation and mask, the done flag refers
to the episode that just ended, and the ended episode's true last observation
is kept in final_obs so value bootstrapping at truncation never sees the
fresh episode's start.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ContractError, ObservabilityLevel, RngStream
from .registry import make_env


@dataclass
class BatchStep:
    """One batch transition; rows are instances.

    All arrays are views into buffers the engine reuses on the next step;
    copy anything you keep.
    """

    obs: np.ndarray         # (N, obs_dim) float64
    reward: np.ndarray      # (N,) float64
    terminated: np.ndarray  # (N,) bool
    truncated: np.ndarray   # (N,) bool
    mask: np.ndarray        # (N, action_dim) bool
    final_obs: np.ndarray   # (N, obs_dim); ended episodes' last obs, else == obs


class EnvBatch:
    """N instances of one environment config at one observability level."""

    def __init__(
        self,
        config_or_id,
        level: ObservabilityLevel,
        num_envs: int,
        seed: int,
        workers: int = 1,
    ):
        if num_envs < 1:
            raise ConfigError(f"num_envs must be >= 1, got {num_envs}")
        if workers < 1:
            raise ConfigError(f"workers must be >= 1, got {workers}")
        self.envs = [make_env(config_or_id, level) for _ in range(num_envs)]
        self.rngs = [RngStream(seed, stream_id=i) for i in range(num_envs)]
        self.num_envs = num_envs
        self.level = level
        self.seed = seed
        template = self.envs[0]
        self.obs_dim = template.obs_dim
        self.action_dim = template.action_dim
        self.gamma = template.gamma
        # struct-of-arrays buffers, reused across steps
        self._obs = np.zeros((num_envs, self.obs_dim), dtype=np.float64)
        self._reward = np.zeros(num_envs, dtype=np.float64)
        self._terminated = np.zeros(num_envs, dtype=np.bool_)
        self._truncated = np.zeros(num_envs, dtype=np.bool_)
        self._mask = np.zeros((num_envs, self.action_dim), dtype=np.bool_)
        self._final_obs = np.zeros((num_envs, self.obs_dim), dtype=np.float64)
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        self._shards = self._make_shards(workers)

    def _make_shards(self, workers: int) -> list[range]:
        n = self.num_envs
        w = min(workers, n)
        bounds = np.linspace(0, n, w + 1).astype(int)
        return [range(bounds[i], bounds[i + 1]) for i in range(w) if bounds[i] < bounds[i + 1]]

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        """Reset every instance; returns (obs, mask) views."""
        for i, env in enumerate(self.envs):
            self._obs[i] = env.reset(self.rngs[i])
            self._mask[i] = env.action_mask()
        return self._obs, self._mask

    def _step_shard(self, shard: range, actions: np.ndarray) -> None:
        for i in shard:
            env = self.envs[i]
            rng = self.rngs[i]
            if not self._mask[i, actions[i]]:
                raise ContractError(f"instance {i}: illegal action {actions[i]}")
            result = env.step(int(actions[i]), rng)
            self._reward[i] = result.reward
            self._terminated[i] = result.terminated
            self._truncated[i] = result.truncated
            self._final_obs[i] = result.obs
            if result.terminated or result.truncated:
                self._obs[i] = env.reset(rng)
                self._mask[i] = env.action_mask()
            else:
                self._obs[i] = result.obs
                self._mask[i] = result.mask

    def step(self, actions) -> BatchStep:
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.num_envs,):
            raise ContractError(f"actions must have shape ({self.num_envs},), got {actions.shape}")
        if (actions < 0).any() or (actions >= self.action_dim).any():
            bad = int(np.flatnonzero((actions < 0) | (actions >= self.action_dim))[0])
            raise ContractError(f"instance {bad}: action {actions[bad]} out of range")
        if self._pool is None:
            self._step_shard(range(self.num_envs), actions)
        else:
            futures = [self._pool.submit(self._step_shard, s, actions) for s in self._shards]
            for f in futures:
                f.result()  # re-raise shard errors
        return BatchStep(
            obs=self._obs,
            reward=self._reward,
            terminated=self._terminated,
            truncated=self._truncated,
            mask=self._mask,
            final_obs=self._final_obs,
        )

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


@dataclass(frozen=True)
class ThroughputReport:
    """Wall-clock measurement of one batch width.

    total_steps counts batch steps; one batch step advances num_envs env
    steps, so steps_per_second = total_steps * num_envs / wall_seconds.
    """

    num_envs: int
    total_steps: int
    wall_seconds: float
    steps_per_second: float
    per_env_seconds_per_10m: float

    @property
    def env_steps(self) -> int:
        return self.total_steps * self.num_envs

    def csv_row(self) -> str:
        return f"{self.num_envs},{self.env_steps},{self.wall_seconds:.6f},{self.steps_per_second:.1f}"


CSV_HEADER = "num_envs,total_steps,wall_seconds,steps_per_second"


def run_throughput(
    config_or_id,
    level: ObservabilityLevel,
    num_envs_list,
    env_steps: int,
    seed: int = 0,
    workers: int = 1,
) -> list[ThroughputReport]:
    """Measure random-legal-action stepping for each batch width.

    env_steps is the per-width env-step budget, rounded up to a whole number
    of batch steps. Action sampling uses a numpy generator outside the timed
    loop's per-instance streams; the benchmark measures engine speed, not a
    reproducibility surface.
    """
    if env_steps < 1:
        raise ConfigError(f"env_steps must be >= 1, got {env_steps}")
    reports = []
    for num_envs in num_envs_list:
        batch = EnvBatch(config_or_id, level, num_envs, seed, workers=workers)
        action_rng = np.random.default_rng(seed)
        batch_steps = -(-env_steps // num_envs)
        _, mask = batch.reset()
        start = time.perf_counter()
        for _ in range(batch_steps):
            noise = action_rng.random((num_envs, batch.action_dim))
            actions = np.argmax(np.where(mask, noise, -1.0), axis=1)
            result = batch.step(actions)
            mask = result.mask
        wall = max(time.perf_counter() - start, 1e-9)
        batch.close()
        reports.append(
            ThroughputReport(
                num_envs=num_envs,
                total_steps=batch_steps,
                wall_seconds=wall,
                steps_per_second=batch_steps * num_envs / wall,
                per_env_seconds_per_10m=wall * 1e7 / batch_steps,
            )
        )
    return reports
