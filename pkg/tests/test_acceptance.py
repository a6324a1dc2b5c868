"""End-to-end acceptance checks for the whole package.

One test per headline guarantee. Each test enforces its tolerance and time
budget with asserts and prints a single ``[criterion N] PASS`` line (visible
under ``pytest -s`` or in captured output) summarizing the measured numbers,
so a verbose run doubles as the acceptance report.

Budgets are asserted against the wall clock of this machine; the heavier
learning checks get the same generous ceilings they were designed for.
"""

from __future__ import annotations

import hashlib
import math
import time
from fractions import Fraction

import numpy as np

from memgap import (
    ActorCritic,
    BattleshipConfig,
    EnvBatch,
    NetConfig,
    ObservabilityLevel,
    PPOConfig,
    RngStream,
    gae,
    make_config,
    make_env,
    ppo_loss_and_grad,
)
from memgap.envs.rocksample import CHECK_BASE, RockSampleConfig
from memgap.envs.tmaze import EAST, NORTH, SOUTH
from memgap.harness import ProtocolSpec, _final_window_mean, run_protocol
from memgap.vector import run_throughput

from test_agents import _fd_loss_grad, _generic_params, _make_minibatch

PARTIAL = ObservabilityLevel.PARTIAL


def _report(n: int, detail: str) -> None:
    print(f"[criterion {n}] PASS: {detail}")


# ---------------------------------------------------------------------------
# 1. T-Maze scripted optimum
# ---------------------------------------------------------------------------


def test_criterion_01_tmaze_scripted_optimal_return():
    t0 = time.perf_counter()
    config = make_config("tmaze_10")
    expected = 4.0 * 0.99 ** 11
    env = make_env(config, PARTIAL)
    for seed in range(20):
        rng = RngStream(seed, 0)
        env.reset(rng)
        actions = [EAST] * (config.n + 1) + [NORTH if env.reward_up else SOUTH]
        ret, discount = 0.0, 1.0
        for action in actions:
            result = env.step(action, rng)
            ret += discount * result.reward
            discount *= config.gamma
        assert result.terminated
        assert abs(ret - expected) < 1e-9, f"seed {seed}: {ret} vs {expected}"
    wall = time.perf_counter() - t0
    assert wall < 1.0
    _report(1, f"tmaze_10 scripted return == 4*0.99^11 = {expected:.6f} "
               f"(tol 1e-9, 20 seeds, {wall:.2f}s)")


# ---------------------------------------------------------------------------
# 2. RockSample sensor accuracy curve
# ---------------------------------------------------------------------------


def test_criterion_02_rocksample_sensor_accuracy():
    t0 = time.perf_counter()
    config = RockSampleConfig(n=5, k=1, max_steps=10 ** 9)
    max_d = math.sqrt(2.0) * (config.n - 1)
    cases = {
        0.0: ((2, 2), (2, 2)),
        1.0: ((2, 2), (2, 3)),
        max_d: ((0, 0), (config.n - 1, config.n - 1)),
    }
    draws = 100_000
    lines = []
    for d, (agent, rock) in cases.items():
        env = make_env(config, PARTIAL)
        rng = RngStream(99, int(d * 1000))
        env.reset(rng)
        env.row, env.col = agent
        env.rock_pos = [rock]
        env.rock_good[:] = True
        expected = 0.5 * (1.0 + 2.0 ** (-d / max_d))
        hits = 0
        for _ in range(draws):
            result = env.step(CHECK_BASE + 0, rng)
            hits += int(result.obs[2 * config.n] > 0.5)
        acc = hits / draws
        assert abs(acc - expected) < 0.01, f"d={d}: {acc} vs {expected}"
        lines.append(f"d={d:.3f}: {acc:.4f}~{expected:.4f}")
    wall = time.perf_counter() - t0
    assert wall < 10.0
    _report(2, f"sensor accuracy within +-0.01 over {draws} draws "
               f"[{'; '.join(lines)}] ({wall:.1f}s)")


# ---------------------------------------------------------------------------
# 3. Battleship uniform-legal play vs exact expectation
# ---------------------------------------------------------------------------


def _expected_shots_uniform(cells: int, ship_cells: int) -> Fraction:
    """Expected shots to hit all ship cells when firing uniformly without
    replacement: recursion over (remaining cells, remaining ship cells)."""
    memo: dict[tuple[int, int], Fraction] = {}

    def rec(r: int, m: int) -> Fraction:
        if m == 0:
            return Fraction(0)
        if (r, m) not in memo:
            hit = Fraction(m, r) * rec(r - 1, m - 1)
            miss = Fraction(r - m, r) * rec(r - 1, m) if r > m else Fraction(0)
            memo[(r, m)] = 1 + hit + miss
        return memo[(r, m)]

    result = rec(cells, ship_cells)
    # closed form of the same expectation: m * (r + 1) / (m + 1)
    assert result == Fraction(ship_cells * (cells + 1), ship_cells + 1)
    return result


def test_criterion_03_battleship_uniform_play_matches_exact_expectation():
    t0 = time.perf_counter()
    config = BattleshipConfig(n=5, ship_lengths=(2,))
    exact_return = 100.0 - float(_expected_shots_uniform(25, 2))
    target_episodes = 100_000
    num_envs = 512
    batch = EnvBatch(config, PARTIAL, num_envs, seed=7)
    _, mask = batch.reset()
    policy_rng = np.random.default_rng(0xB5)
    totals = np.zeros(num_envs)
    returns: list[float] = []
    while len(returns) < target_episodes:
        counts = mask.sum(axis=1)
        pick = (policy_rng.random(num_envs) * counts).astype(np.int64)
        cumulative = np.cumsum(mask, axis=1)
        actions = (cumulative == (pick + 1)[:, None]).argmax(axis=1)
        step = batch.step(actions)
        totals += step.reward
        for i in np.flatnonzero(step.terminated):
            returns.append(totals[i])
            totals[i] = 0.0
        assert not step.truncated.any(), "refire mask guarantees termination"
        mask = step.mask
    mean = float(np.mean(returns[:target_episodes]))
    assert abs(mean - exact_return) < 0.5, f"{mean} vs {exact_return}"
    wall = time.perf_counter() - t0
    assert wall < 60.0
    _report(3, f"5x5/len-2 uniform-legal mean return {mean:.3f} vs exact "
               f"{exact_return:.3f} (tol 0.5, {target_episodes} episodes, {wall:.1f}s)")


# ---------------------------------------------------------------------------
# 4. Loss gradients vs central finite differences
# ---------------------------------------------------------------------------


def test_criterion_04_gradients_match_finite_differences():
    t0 = time.perf_counter()
    lines = []
    for torso, n_critics in (("mlp", 1), ("mlp", 2), ("gru", 1), ("gru", 2)):
        net = ActorCritic(NetConfig(torso, input_dim=4, action_dim=3,
                                    hidden_size=6, n_critics=n_critics))
        params = _generic_params(net, seed=131 + n_critics)
        cfg = PPOConfig(
            vf_coeff=0.5,
            entropy_coeff=0.01,
            clip_eps=0.2,
            double_critic=(n_critics == 2),
            ld_weight=0.3 if n_critics == 2 else 0.0,
        )
        data = _make_minibatch(net, params, seed=71, recurrent=(torso == "gru"))
        _, grad, _ = ppo_loss_and_grad(net, params, data, cfg)
        fd = _fd_loss_grad(lambda q: ppo_loss_and_grad(net, q, data, cfg)[0], params)
        denom = np.maximum(1.0, np.maximum(np.abs(grad), np.abs(fd)))
        worst = float(np.max(np.abs(grad - fd) / denom))
        assert worst < 1e-4, f"{torso}/{n_critics} critics: {worst:.3e}"
        lines.append(f"{torso}/{n_critics}c {worst:.1e}")
    wall = time.perf_counter() - t0
    assert wall < 60.0
    _report(4, f"analytic vs central-difference gradients, worst relative "
               f"error per combo [{'; '.join(lines)}] (tol 1e-4, {wall:.1f}s)")


# ---------------------------------------------------------------------------
# 5. Advantage estimator vs brute force
# ---------------------------------------------------------------------------


def test_criterion_05_advantage_estimator_matches_brute_force():
    t0 = time.perf_counter()
    T = 8
    worst = 0.0
    for seed in range(100):
        rng = RngStream(seed, 0x6AE)
        rewards = rng.normal(T)
        values = rng.normal(T)
        bootstrap = float(rng.normal(1)[0])
        terminated = np.array([rng.bernoulli(0.25) for _ in range(T)])
        truncated = np.array([rng.bernoulli(0.2) for _ in range(T)]) & ~terminated
        trunc_values = rng.normal(T)
        gamma, lam = 0.97, 0.9
        adv, targets = gae(rewards, values, terminated, truncated, bootstrap,
                           gamma, lam, truncation_values=trunc_values)
        # forward brute force: sum (gamma*lam)^l * delta_l until episode end
        next_values = np.append(values[1:], bootstrap)
        next_values = np.where(truncated, trunc_values, next_values)
        deltas = rewards + gamma * next_values * (~terminated) - values
        brute = np.zeros(T)
        for t in range(T):
            factor = 1.0
            for l in range(t, T):
                brute[t] += factor * deltas[l]
                if terminated[l] or truncated[l]:
                    break
                factor *= gamma * lam
        worst = max(worst, float(np.max(np.abs(adv - brute))))
        worst = max(worst, float(np.max(np.abs(targets - (brute + values)))))
    assert worst < 1e-10, f"worst deviation {worst:.3e}"

    # lambda = 0 reduces to the one-step TD error
    rng = RngStream(5, 0x6AE0)
    rewards = rng.normal(T)
    values = rng.normal(T)
    terminated = np.zeros(T, dtype=bool)
    truncated = np.zeros(T, dtype=bool)
    bootstrap = 0.31
    adv0, _ = gae(rewards, values, terminated, truncated, bootstrap, 0.95, 0.0)
    next_values = np.append(values[1:], bootstrap)
    td = rewards + 0.95 * next_values - values
    np.testing.assert_allclose(adv0, td, rtol=0, atol=1e-12)

    # lambda = 1 reduces to discounted Monte-Carlo return minus baseline
    terminated = np.zeros(T, dtype=bool)
    terminated[-1] = True
    adv1, _ = gae(rewards, values, terminated, truncated, 0.0, 0.95, 1.0)
    mc = np.zeros(T)
    acc = 0.0
    for t in reversed(range(T)):
        acc = rewards[t] + 0.95 * acc
        mc[t] = acc
    np.testing.assert_allclose(adv1, mc - values, rtol=0, atol=1e-12)

    wall = time.perf_counter() - t0
    assert wall < 1.0
    _report(5, f"100 random 8-step instances match double-loop oracle "
               f"(worst {worst:.1e}, tol 1e-10) plus TD/MC identities ({wall:.2f}s)")


# ---------------------------------------------------------------------------
# 6. Desk-scale memory gap on tmaze_5
# ---------------------------------------------------------------------------


def test_criterion_06_desk_scale_memory_gap(tmp_path):
    t0 = time.perf_counter()
    optimal = 4.0 * 0.99 ** 6
    memory_bar = 0.9 * optimal
    floor_bar = 0.6 * optimal
    spec = ProtocolSpec(
        env_id="tmaze_5",
        total_steps=500_000,
        seed=2020,
        n_sweep=1,
        n_final=5,
        num_envs=4,
        num_steps=128,
        hidden_size=32,
        memory_agents=("rnn",),
        role_overrides={
            "rnn": {"num_envs": 16, "lr": 2.5e-3, "lambda0": 0.7},
            "floor": {"lr": 2.5e-4, "lambda0": 0.3},
            "ceiling": {"lr": 2.5e-4, "lambda0": 0.3},
        },
    )
    report = run_protocol(spec, out_dir=tmp_path)

    rnn_finals = [
        _final_window_mean(rec.series, spec.total_steps, "discounted")
        for rec in report.roles["rnn"].final_records
    ]
    floor_finals = [
        _final_window_mean(rec.series, spec.total_steps, "discounted")
        for rec in report.roles["floor"].final_records
    ]
    rnn_hits = sum(v >= memory_bar for v in rnn_finals)
    assert rnn_hits >= 4, f"recurrent finals {rnn_finals} vs bar {memory_bar:.3f}"
    assert all(v <= floor_bar for v in floor_finals), (
        f"memoryless finals {floor_finals} vs ceiling-of-floor {floor_bar:.3f}"
    )
    assert report.gap.memory_improvable is True
    wall = time.perf_counter() - t0
    assert wall < 1800.0
    _report(6, f"tmaze_5 gap: recurrent {rnn_hits}/5 seeds >= {memory_bar:.3f}, "
               f"memoryless all <= {floor_bar:.3f} "
               f"(finals {[f'{v:.2f}' for v in floor_finals]}), "
               f"memory_improvable=True ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 7. Batch/standalone determinism across worker counts
# ---------------------------------------------------------------------------

_FAMILIES = ("tmaze_5", "rocksample_4_3", "battleship_3", "maze_01")


def _trace_digest_batch(env_id: str, seed: int, steps: int, workers: int) -> str:
    num_envs = 4
    config = make_config(env_id)
    batch = EnvBatch(config, PARTIAL, num_envs, seed, workers=workers)
    obs, mask = batch.reset()
    h = hashlib.sha256()
    h.update(obs.tobytes())
    h.update(mask.tobytes())
    policy_rng = np.random.default_rng(seed ^ 0xA5A5)
    for _ in range(steps):
        noise = policy_rng.random(mask.shape)
        actions = np.where(mask, noise, -1.0).argmax(axis=1)
        step = batch.step(actions)
        for arr in (step.obs, step.reward, step.terminated, step.truncated,
                    step.mask, step.final_obs):
            h.update(arr.tobytes())
        mask = step.mask
    return h.hexdigest()


def _trace_digest_standalone(env_id: str, seed: int, steps: int) -> str:
    num_envs = 4
    config = make_config(env_id)
    envs = [make_env(config, PARTIAL) for _ in range(num_envs)]
    rngs = [RngStream(seed, stream_id=i) for i in range(num_envs)]
    obs_rows, mask_rows = [], []
    for env, rng in zip(envs, rngs):
        obs_rows.append(env.reset(rng))
        mask_rows.append(env.action_mask())
    obs = np.asarray(obs_rows, dtype=np.float64)
    mask = np.asarray(mask_rows, dtype=bool)
    h = hashlib.sha256()
    h.update(obs.tobytes())
    h.update(mask.tobytes())
    policy_rng = np.random.default_rng(seed ^ 0xA5A5)
    for _ in range(steps):
        noise = policy_rng.random(mask.shape)
        actions = np.where(mask, noise, -1.0).argmax(axis=1)
        obs_rows, mask_rows, final_rows = [], [], []
        rewards = np.zeros(num_envs)
        terminated = np.zeros(num_envs, dtype=bool)
        truncated = np.zeros(num_envs, dtype=bool)
        for i, (env, rng) in enumerate(zip(envs, rngs)):
            result = env.step(int(actions[i]), rng)
            rewards[i] = result.reward
            terminated[i] = result.terminated
            truncated[i] = result.truncated
            final_rows.append(result.obs)
            if result.terminated or result.truncated:
                obs_rows.append(env.reset(rng))
                mask_rows.append(env.action_mask())
            else:
                obs_rows.append(result.obs)
                mask_rows.append(result.mask)
        obs = np.asarray(obs_rows, dtype=np.float64)
        mask = np.asarray(mask_rows, dtype=bool)
        final_obs = np.asarray(final_rows, dtype=np.float64)
        for arr in (obs, rewards, terminated, truncated, mask, final_obs):
            h.update(arr.tobytes())
    return h.hexdigest()


def test_criterion_07_bitwise_determinism_across_seeds_and_workers():
    t0 = time.perf_counter()
    steps = 500
    n_seeds = 50
    for env_id in _FAMILIES:
        for seed in range(n_seeds):
            reference = _trace_digest_batch(env_id, seed, steps, workers=1)
            assert _trace_digest_batch(env_id, seed, steps, workers=3) == reference, (
                f"{env_id} seed {seed}: workers=3 diverged from workers=1"
            )
            assert _trace_digest_standalone(env_id, seed, steps) == reference, (
                f"{env_id} seed {seed}: standalone replay diverged from batch"
            )
    wall = time.perf_counter() - t0
    assert wall < 300.0
    _report(7, f"bit-identical traces over {n_seeds} seeds x {steps} steps x "
               f"{len(_FAMILIES)} families, workers 1 vs 3 vs standalone ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 8. Batched throughput beats one-env stepping
# ---------------------------------------------------------------------------


def test_criterion_08_batching_reduces_per_env_step_cost():
    t0 = time.perf_counter()
    reports = run_throughput(
        make_config("rocksample_11_11"), PARTIAL, [1, 256], env_steps=50_000, seed=3
    )
    single, batched = reports
    assert single.num_envs == 1 and batched.num_envs == 256
    # amortized wall time per env-step (total_steps counts batch steps)
    per_step_single = single.wall_seconds / (single.total_steps * single.num_envs)
    per_step_batched = batched.wall_seconds / (batched.total_steps * batched.num_envs)
    assert per_step_batched < per_step_single, (
        f"N=256 per-env step {per_step_batched:.3e}s not below N=1 {per_step_single:.3e}s"
    )
    wall = time.perf_counter() - t0
    _report(8, "rocksample_11_11 throughput: "
               f"N=1 {single.steps_per_second:,.0f} env-steps/s "
               f"({per_step_single * 1e6:.2f}us/env-step), "
               f"N=256 {batched.steps_per_second:,.0f} env-steps/s "
               f"({per_step_batched * 1e6:.2f}us/env-step) ({wall:.1f}s)")


# ---------------------------------------------------------------------------
# 9. Default training configuration values
# ---------------------------------------------------------------------------


def test_criterion_09_default_config_round_trip():
    t0 = time.perf_counter()
    from memgap.cli import parse_ppo_overrides

    assert parse_ppo_overrides([]) == {}  # no flags -> no overrides
    cfg = PPOConfig(**parse_ppo_overrides([]))
    assert cfg == PPOConfig()
    expected = dict(num_steps=128, clip_eps=0.2, vf_coeff=0.5,
                    max_grad_norm=0.5, seed=2020, n_seeds=5)
    for field, value in expected.items():
        actual = getattr(cfg, field)
        assert actual == value, f"{field}: {actual} != {value}"
    wall = time.perf_counter() - t0
    _report(9, "default config carries "
               + ", ".join(f"{k}={v}" for k, v in expected.items())
               + f" ({wall:.2f}s)")
