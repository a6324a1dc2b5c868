"""Environment ids: parse `tmaze_5`-style strings into configs and instances.

Supported id patterns:
    tmaze_{n}                corridor length n
    rocksample_{n}_{k}       n-by-n grid with k rocks
    battleship_{n}           n-by-n board; fleet is the subset of {5,4,3,2}
                             that fits the board
    maze_01 | maze_02 | maze_03   bundled layouts with step limits
                                  2000 / 4000 / 6000
"""
from __future__ import annotations

from importlib import resources

from .core import ConfigError, ObservabilityLevel
from .envs import (
    BattleshipConfig,
    BattleshipEnv,
    Environment,
    MazeConfig,
    MazeEnv,
    RockSampleConfig,
    RockSampleEnv,
    TMazeConfig,
    TMazeEnv,
    load_layout,
)

_MAZE_MAX_STEPS = {"maze_01": 2000, "maze_02": 4000, "maze_03": 6000}

ID_PATTERNS = (
    "tmaze_{n}",
    "rocksample_{n}_{k}",
    "battleship_{n}",
    "maze_01",
    "maze_02",
    "maze_03",
)

ENV_FAMILIES = ("tmaze", "rocksample", "battleship", "maze")


def _bad_id(env_id: str) -> ConfigError:
    return ConfigError(f"unknown env id {env_id!r}; valid patterns: {', '.join(ID_PATTERNS)}")


def _int_parts(env_id: str, parts: list[str], want: int) -> list[int]:
    if len(parts) != want or not all(p.isdigit() for p in parts):
        raise _bad_id(env_id)
    return [int(p) for p in parts]


def bundled_layout(maze_id: str):
    if maze_id not in _MAZE_MAX_STEPS:
        raise _bad_id(maze_id)
    text = (resources.files("memgap") / "layouts" / f"{maze_id}.maze").read_text()
    return load_layout(text, layout_id=maze_id)


def make_config(env_id: str):
    """Parse an env id into its config dataclass."""
    name, _, rest = env_id.partition("_")
    parts = rest.split("_") if rest else []
    if name == "tmaze":
        (n,) = _int_parts(env_id, parts, 1)
        return TMazeConfig(n=n)
    if name == "rocksample":
        n, k = _int_parts(env_id, parts, 2)
        return RockSampleConfig(n=n, k=k)
    if name == "battleship":
        (n,) = _int_parts(env_id, parts, 1)
        fleet = tuple(length for length in (5, 4, 3, 2) if length <= n)
        if not fleet:
            raise ConfigError(f"board {n}x{n} too small for any ship")
        return BattleshipConfig(n=n, ship_lengths=fleet)
    if name == "maze":
        layout = bundled_layout(env_id)
        return MazeConfig(layout=layout, max_steps=_MAZE_MAX_STEPS[env_id])
    raise _bad_id(env_id)


_ENV_CLASS = {
    TMazeConfig: TMazeEnv,
    RockSampleConfig: RockSampleEnv,
    BattleshipConfig: BattleshipEnv,
    MazeConfig: MazeEnv,
}


def register_env(config_cls: type, env_cls: type) -> None:
    """Register an extra config->environment mapping (e.g. diagnostic envs)."""
    if not (isinstance(env_cls, type) and issubclass(env_cls, Environment)):
        raise ConfigError(f"{env_cls!r} is not an Environment subclass")
    _ENV_CLASS[config_cls] = env_cls


def make_env(config_or_id, level: ObservabilityLevel) -> Environment:
    """Instantiate an environment from a config object or an env id string."""
    config = make_config(config_or_id) if isinstance(config_or_id, str) else config_or_id
    try:
        cls = _ENV_CLASS[type(config)]
    except KeyError:
        raise ConfigError(f"no environment class for config type {type(config).__name__}") from None
    return cls(config, level)
