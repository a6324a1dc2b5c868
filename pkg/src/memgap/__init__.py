"""Deterministic batched partially observable environments with selectable
observability levels, a small recurrent PPO stack, and the
memory-improvability evaluation protocol."""

from .core import (
    Capabilities,
    CapabilityError,
    ConfigError,
    ContractError,
    DiscountedReturnAccumulator,
    EnvError,
    ObservabilityLevel,
    RngStream,
    STREAM_ACTION_SAMPLING,
    STREAM_MINIBATCH_SHUFFLE,
    STREAM_PARAM_INIT,
    STREAM_TRACE_BASE,
    StepResult,
    derive_seed,
    discounted_return,
    mix64,
    obs_dim,
)
from .envs import (
    BattleshipConfig,
    BattleshipEnv,
    Environment,
    MazeConfig,
    MazeEnv,
    MazeLayout,
    RockSampleConfig,
    RockSampleEnv,
    TMazeConfig,
    TMazeEnv,
    belief_ceiling_player,
    load_layout,
    place_ships,
    sensor_accuracy,
)
from .registry import (
    ENV_FAMILIES,
    ID_PATTERNS,
    bundled_layout,
    make_config,
    make_env,
    register_env,
)
from .vector import CSV_HEADER, BatchStep, EnvBatch, ThroughputReport, run_throughput
from .nets import ActorCritic, NetConfig, orthogonal
from .agents import (
    AdamState,
    MinibatchData,
    PPOConfig,
    TrainingError,
    TrainResult,
    adam_step,
    agent_net_config,
    clip_grad_norm,
    gae,
    load_checkpoint,
    masked_entropy,
    masked_log_softmax,
    ppo_loss_and_grad,
    run_episodes,
    sample_masked,
    save_checkpoint,
    train,
)
from .harness import (
    ExperimentSpec,
    GapReport,
    ProtocolReport,
    ProtocolSpec,
    RoleResult,
    RunRecord,
    auc_select,
    build_roles,
    confidence_interval,
    config_fingerprint,
    curve_auc,
    improvability_gap,
    read_run_record,
    resample_curve,
    run_fingerprint,
    run_protocol,
    smooth_curve,
    write_run_record,
)

__version__ = "0.1.0"

__all__ = [
    "Capabilities",
    "CapabilityError",
    "ConfigError",
    "ContractError",
    "DiscountedReturnAccumulator",
    "EnvError",
    "ObservabilityLevel",
    "RngStream",
    "STREAM_ACTION_SAMPLING",
    "STREAM_MINIBATCH_SHUFFLE",
    "STREAM_PARAM_INIT",
    "STREAM_TRACE_BASE",
    "StepResult",
    "derive_seed",
    "discounted_return",
    "mix64",
    "obs_dim",
    "BattleshipConfig",
    "BattleshipEnv",
    "Environment",
    "MazeConfig",
    "MazeEnv",
    "MazeLayout",
    "RockSampleConfig",
    "RockSampleEnv",
    "TMazeConfig",
    "TMazeEnv",
    "belief_ceiling_player",
    "load_layout",
    "place_ships",
    "sensor_accuracy",
    "ENV_FAMILIES",
    "ID_PATTERNS",
    "bundled_layout",
    "make_config",
    "make_env",
    "register_env",
    "CSV_HEADER",
    "BatchStep",
    "EnvBatch",
    "ThroughputReport",
    "run_throughput",
    "ActorCritic",
    "NetConfig",
    "orthogonal",
    "AdamState",
    "MinibatchData",
    "PPOConfig",
    "TrainingError",
    "TrainResult",
    "adam_step",
    "agent_net_config",
    "clip_grad_norm",
    "gae",
    "load_checkpoint",
    "masked_entropy",
    "masked_log_softmax",
    "ppo_loss_and_grad",
    "run_episodes",
    "sample_masked",
    "save_checkpoint",
    "train",
    "ExperimentSpec",
    "GapReport",
    "ProtocolReport",
    "ProtocolSpec",
    "RoleResult",
    "RunRecord",
    "auc_select",
    "build_roles",
    "confidence_interval",
    "config_fingerprint",
    "curve_auc",
    "improvability_gap",
    "read_run_record",
    "resample_curve",
    "run_fingerprint",
    "run_protocol",
    "smooth_curve",
    "write_run_record",
]
