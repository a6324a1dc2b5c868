"""Learning sanity invariants.

Two end-to-end checks that the reference learners actually learn:
  - a memoryless agent solves a two-armed deterministic bandit (no memory
    needed, pure policy-gradient sanity), and
  - on a corridor task whose optimal behavior needs memory of the initial
    cue, a recurrent agent approaches the optimal discounted return while a
    memoryless agent is structurally stuck far below it.

These train real agents, so this module is the slow part of the suite
(several minutes on one core).
"""
from __future__ import annotations

import numpy as np

from memgap import ObservabilityLevel, PPOConfig, make_config, train
from memgap.harness import _final_window_mean


def _final_means(config_or_id, kind: str, cfg: PPOConfig, seeds) -> list[float]:
    out = []
    for seed in seeds:
        result = train(config_or_id, ObservabilityLevel.PARTIAL, kind, cfg, seed)
        out.append(_final_window_mean(result.episodes, cfg.total_steps, "discounted"))
    return out


def test_memoryless_agent_solves_bandit_on_every_seed(bandit_config):
    cfg = PPOConfig(
        num_envs=4,
        num_steps=16,
        num_minibatches=2,
        hidden_size=16,
        lr=5e-3,
        entropy_coeff=1e-4,
        anneal_lr=False,
        total_steps=10_000,
    )
    means = []
    for seed in range(5):
        result = train(bandit_config, ObservabilityLevel.PARTIAL, "memoryless", cfg, seed)
        tail = [undisc for _, _, undisc in result.episodes[-500:]]
        means.append(float(np.mean(tail)))
    assert all(m > 0.95 for m in means), f"per-seed mean rewards: {means}"


def test_recurrent_agent_beats_memoryless_on_memory_task():
    # corridor length 3: the cue is only visible on the first step, so the
    # optimal return 4 * gamma^4 is reachable only with memory
    optimal = 4.0 * 0.99**4
    memory_bar = 0.9 * optimal
    floor_bar = 0.6 * optimal
    env = make_config("tmaze_3")

    rnn_cfg = PPOConfig(
        num_envs=16,
        num_steps=128,
        hidden_size=32,
        lr=2.5e-3,
        lambda0=0.7,
        action_concat=True,
        total_steps=500_000,
    )
    rnn_finals = _final_means(env, "rnn", rnn_cfg, range(5))

    mlp_cfg = PPOConfig(
        num_envs=4,
        num_steps=128,
        hidden_size=32,
        lr=2.5e-4,
        lambda0=0.3,
        total_steps=500_000,
    )
    mlp_finals = _final_means(env, "memoryless", mlp_cfg, range(5))

    rnn_hits = sum(m > memory_bar for m in rnn_finals)
    assert rnn_hits >= 4, (
        f"recurrent agent cleared {memory_bar:.3f} on only {rnn_hits}/5 seeds: {rnn_finals}"
    )
    assert all(m <= floor_bar for m in mlp_finals), (
        f"memoryless agent should stay below {floor_bar:.3f}: {mlp_finals}"
    )
    assert np.mean(rnn_finals) > np.mean(mlp_finals)
