"""Shared data model: observability levels, step contracts, returns, RNG streams.

Everything an environment or the batch engine hands around lives here, so the
individual environment modules only depend on this file and numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class EnvError(Exception):
    """Base class for environment-suite errors."""


class ConfigError(EnvError):
    """Invalid environment or training configuration."""


class CapabilityError(ConfigError):
    """An observability level (or similar feature) the environment does not support."""


class ContractError(EnvError):
    """A caller violated an operation precondition (illegal action, empty input, ...)."""


class ObservabilityLevel(Enum):
    """How much state information the observation vector carries.

    PARTIAL is supported by every environment. PERFECT_MEMORY and FULL_STATE
    are per-environment capabilities; querying an unsupported level raises
    CapabilityError.
    """

    PARTIAL = "partial"
    PERFECT_MEMORY = "perfect_memory"
    FULL_STATE = "full_state"

    @classmethod
    def parse(cls, text: str) -> "ObservabilityLevel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(l.value for l in cls)
            raise ConfigError(f"unknown observability level {text!r} (valid: {valid})") from None


@dataclass(frozen=True)
class Capabilities:
    """Static contract of one environment configuration."""

    levels: tuple[ObservabilityLevel, ...]
    obs_dims: dict[ObservabilityLevel, int]
    action_dim: int
    reward_range: tuple[float, float]
    gamma: float
    max_steps: int

    def require(self, level: ObservabilityLevel) -> None:
        if level not in self.levels:
            supported = ", ".join(l.value for l in self.levels)
            raise CapabilityError(f"level {level.value!r} unsupported (supported: {supported})")


@dataclass
class StepResult:
    """One environment transition.

    `terminated` and `truncated` are never both set by a single step. `mask`
    is the legal-action mask for the *next* step and has at least one legal
    action whenever the episode is still live.
    """

    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    mask: np.ndarray

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated


def obs_dim(config, level: ObservabilityLevel) -> int:
    """Observation length for an environment config at an observability level."""
    caps: Capabilities = config.capabilities()
    caps.require(level)
    return caps.obs_dims[level]


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma**i * rewards[i]."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    total = 0.0
    g = 1.0
    for r in rewards:
        total += g * float(r)
        g *= gamma
    return total


@dataclass
class DiscountedReturnAccumulator:
    """Running discounted return of one episode.

    After t calls to add(), total equals sum_{i<t} gamma**i * r_i.
    """

    gamma: float
    running_discount: float = 1.0
    total: float = 0.0

    def add(self, reward: float) -> None:
        self.total += self.running_discount * float(reward)
        self.running_discount *= self.gamma

    def reset(self) -> None:
        self.running_discount = 1.0
        self.total = 0.0


# --- counter-based splittable RNG -------------------------------------------
#
# SplitMix64 output function over a per-stream key plus a draw counter. The
# same (seed, stream_id, counter) triple produces the same u64 on every
# platform; period per stream is 2**64. Streams with distinct stream_id get
# keys separated by two rounds of the mixer, which is enough statistical
# independence for simulation use.

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Reserved stream ids. Environment instance i uses stream_id=i, so auxiliary
# consumers park far above any realistic batch width.
STREAM_TRACE_BASE = 2**32
STREAM_PARAM_INIT = 2**48
STREAM_ACTION_SAMPLING = 2**48 + 1
STREAM_MINIBATCH_SHUFFLE = 2**48 + 2


def mix64(z: int) -> int:
    """SplitMix64 finalizer; bijective on 64-bit integers."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *labels: int) -> int:
    """Fold integer labels into a seed; used to give sub-runs disjoint streams."""
    out = mix64(seed & _MASK64)
    for lab in labels:
        out = mix64(out ^ mix64((lab & _MASK64) + _GOLDEN))
    return out


@dataclass
class RngStream:
    """Counter-based random stream addressed by (seed, stream_id, counter)."""

    seed: int
    stream_id: int = 0
    counter: int = 0
    _key: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.seed &= _MASK64
        self.stream_id &= _MASK64
        self._key = mix64(mix64(self.seed + _GOLDEN) ^ mix64(self.stream_id ^ 0x5851F42D4C957F2D))

    def next_u64(self) -> int:
        self.counter = (self.counter + 1) & _MASK64
        return mix64((self._key + self.counter * _GOLDEN) & _MASK64)

    def uniform(self) -> float:
        """Float64 in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint(self, n: int) -> int:
        """Unbiased integer in [0, n)."""
        if n <= 0:
            raise ContractError(f"randint bound must be positive, got {n}")
        threshold = (1 << 64) % n
        while True:
            u = self.next_u64()
            if u >= threshold:
                return u % n

    def bernoulli(self, p: float = 0.5) -> bool:
        return self.uniform() < p

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of range(n)."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample_distinct(self, n: int, k: int) -> list[int]:
        """k distinct integers from range(n), order random."""
        if k > n:
            raise ContractError(f"cannot sample {k} distinct values from range({n})")
        picked: list[int] = []
        seen: set[int] = set()
        while len(picked) < k:
            v = self.randint(n)
            if v not in seen:
                seen.add(v)
                picked.append(v)
        return picked

    def normal(self, size: int) -> np.ndarray:
        """size iid standard normals via Box-Muller (two uniforms per draw)."""
        out = np.empty(size, dtype=np.float64)
        for i in range(size):
            u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # (0, 1]
            u2 = (self.next_u64() >> 11) * 2.0**-53
            out[i] = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return out

    def state(self) -> tuple[int, int, int]:
        return (self.seed, self.stream_id, self.counter)
