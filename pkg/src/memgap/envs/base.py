"""Environment interface shared by every family in the suite.

An Environment owns one episode's mutable state. Randomness always comes in
through the caller's RngStream, so the same (seed, stream) replays the same
episode regardless of how many instances run side by side.
"""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..core import Capabilities, ContractError, ObservabilityLevel, RngStream, StepResult


class Environment(ABC):
    """One environment instance at a fixed observability level."""

    def __init__(self, config, level: ObservabilityLevel):
        caps = config.capabilities()
        caps.require(level)
        self.config = config
        self.level = level
        self.obs_dim: int = caps.obs_dims[level]
        self.action_dim: int = caps.action_dim
        self.gamma: float = caps.gamma
        self.max_steps: int = caps.max_steps
        self._done = True

    @property
    def done(self) -> bool:
        return self._done

    def _require_live(self) -> None:
        if self._done:
            raise ContractError("step() on a finished episode; call reset() first")

    @abstractmethod
    def reset(self, rng: RngStream) -> np.ndarray:
        """Start a new episode; returns the first observation."""

    @abstractmethod
    def step(self, action: int, rng: RngStream) -> StepResult:
        """Advance one step. The result's mask is the next step's legal set."""

    @abstractmethod
    def observe(self, level: ObservabilityLevel | None = None) -> np.ndarray:
        """Observation of the current state (defaults to the instance level)."""

    @abstractmethod
    def action_mask(self) -> np.ndarray:
        """Boolean legal-action vector for the current state."""

    def capabilities(self) -> Capabilities:
        return self.config.capabilities()
