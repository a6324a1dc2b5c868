from .base import Environment
from .tmaze import TMazeConfig, TMazeEnv
from .rocksample import RockSampleConfig, RockSampleEnv, sensor_accuracy
from .battleship import BattleshipConfig, BattleshipEnv, place_ships, belief_ceiling_player
from .maze import MazeConfig, MazeEnv, MazeLayout, load_layout

__all__ = [
    "Environment",
    "TMazeConfig",
    "TMazeEnv",
    "RockSampleConfig",
    "RockSampleEnv",
    "sensor_accuracy",
    "BattleshipConfig",
    "BattleshipEnv",
    "place_ships",
    "belief_ceiling_player",
    "MazeConfig",
    "MazeEnv",
    "MazeLayout",
    "load_layout",
]
