"""PPO reference learners: memoryless MLP and recurrent GRU actor-critic.

Everything here is plain numpy over the flat parameter vectors from nets.py.
The loss path is written once (`ppo_loss_and_grad`) with analytic gradients,
so finite-difference tests can check the exact code that training runs.

Conventions that matter for correctness:
  - `terminated` cuts bootstrapping; `truncated` bootstraps the value of the
    episode's true last observation (final_obs from the batch engine), which
    is NOT the auto-reset observation stored in the next row.
  - GRU hidden states reset to zeros at episode starts, and backpropagation
    stops there (the `starts` mask in nets.gru_forward).
  - All randomness flows through named counter streams of the run seed:
    parameter init, action sampling, and minibatch shuffling each own one,
    and environment instance i owns stream i, so a run is reproducible
    bit-for-bit from (config, seed).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    STREAM_ACTION_SAMPLING,
    STREAM_MINIBATCH_SHUFFLE,
    STREAM_PARAM_INIT,
    ConfigError,
    ContractError,
    DiscountedReturnAccumulator,
    EnvError,
    ObservabilityLevel,
    RngStream,
)
from .nets import ActorCritic, NetConfig
from .vector import EnvBatch


AGENT_KINDS = ("memoryless", "rnn", "ld")


class TrainingError(EnvError):
    """Training produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class PPOConfig:
    """Training hyperparameters; defaults follow the common-settings table."""

    num_envs: int = 4
    num_steps: int = 128
    num_minibatches: int = 4
    double_critic: bool = False
    action_concat: bool = False
    lr: float = 2.5e-4
    lambda0: float = 0.95
    lambda1: float = 0.5
    alpha: float = 1.0
    ld_weight: float = 0.0
    vf_coeff: float = 0.5
    hidden_size: int = 128
    total_steps: int = 1_500_000
    entropy_coeff: float = 0.01
    clip_eps: float = 0.2
    max_grad_norm: float = 0.5
    anneal_lr: bool = True
    seed: int = 2020  # default run seed; explicit seed arguments take precedence
    n_seeds: int = 5  # default seed count for multi-seed sweeps
    save_checkpoints: bool = False
    default_max_steps_in_episode: int = 1000  # cap when the env config sets none
    update_epochs: int = 4
    adv_norm: bool = True
    gamma: float | None = None  # None: use the environment's discount

    def __post_init__(self) -> None:
        for name in ("num_envs", "num_steps", "num_minibatches", "update_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("lambda0", "lambda1"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.total_steps < self.num_envs * self.num_steps:
            raise ConfigError("total_steps smaller than one rollout (num_envs * num_steps)")


def agent_net_config(kind: str, input_dim: int, action_dim: int, hidden_size: int) -> NetConfig:
    if kind == "memoryless":
        return NetConfig("mlp", input_dim, action_dim, hidden_size, n_critics=1)
    if kind == "rnn":
        return NetConfig("gru", input_dim, action_dim, hidden_size, n_critics=1)
    if kind == "ld":
        return NetConfig("gru", input_dim, action_dim, hidden_size, n_critics=2)
    raise ConfigError(f"unknown agent kind {kind!r}; valid: {', '.join(AGENT_KINDS)}")


# --- masked categorical -------------------------------------------------------


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray):
    """Log-probabilities with illegal actions at exactly -inf (probability 0).

    logits (..., A) float, mask (..., A) bool with >= 1 legal entry per row.
    Returns (logp, probs).
    """
    if not mask.any(axis=-1).all():
        raise ContractError("action mask with no legal action")
    masked = np.where(mask, logits, -np.inf)
    peak = masked.max(axis=-1, keepdims=True)
    ex = np.exp(masked - peak)
    total = ex.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):  # log(0) rows cannot occur; -inf - lse is fine
        logp = masked - (peak + np.log(total))
    return logp, ex / total


def masked_entropy(logp: np.ndarray, probs: np.ndarray) -> np.ndarray:
    safe = np.where(probs > 0.0, logp, 0.0)
    return -(probs * safe).sum(axis=-1)


def sample_masked(logits: np.ndarray, mask: np.ndarray, rng: RngStream):
    """Sample one action per row by inverse CDF; rows consume draws in order.

    Returns (actions, logp_of_actions).
    """
    logp, probs = masked_log_softmax(logits, mask)
    n = probs.shape[0]
    actions = np.empty(n, dtype=np.int64)
    for i in range(n):
        u = rng.uniform() * probs[i].sum()  # renormalize away rounding
        actions[i] = min(int(np.searchsorted(np.cumsum(probs[i]), u, side="right")), probs.shape[1] - 1)
    return actions, logp[np.arange(n), actions]


# --- generalized advantage estimation ----------------------------------------


def gae(
    rewards,
    values,
    dones,
    truncateds,
    bootstrap_value,
    gamma: float,
    lam: float,
    truncation_values=None,
):
    """Advantages and value targets over a rollout.

    rewards/values/dones/truncateds: (T, N) (or (T,) for N=1).
    dones marks terminations: the successor value is dropped and the
    recursion stops. truncateds marks step-limit cuts: the recursion stops
    but the successor value still bootstraps; that successor is the episode's
    own last observation, so its value must be supplied in truncation_values
    wherever truncateds is set. bootstrap_value (N,) is V(obs after the last
    row) and feeds the last row when it is not done.

    Returns (advantages, targets) with targets = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    squeeze = rewards.ndim == 1
    atleast = lambda a: np.asarray(a, dtype=np.float64).reshape(rewards.shape[0], -1)
    r = atleast(rewards)
    v = atleast(values)
    done = atleast(dones)
    trunc = atleast(truncateds)
    T, N = r.shape
    boot = np.asarray(bootstrap_value, dtype=np.float64).reshape(N)

    next_values = np.empty_like(v)
    next_values[:-1] = v[1:]
    next_values[-1] = boot
    if truncation_values is not None:
        next_values = np.where(trunc > 0.0, atleast(truncation_values), next_values)
    elif trunc.any():
        raise ContractError("truncation_values required when any step truncates")

    adv = np.zeros_like(v)
    carry = np.zeros(N, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        delta = r[t] + gamma * next_values[t] * (1.0 - done[t]) - v[t]
        carry = delta + gamma * lam * (1.0 - done[t]) * (1.0 - trunc[t]) * carry
        adv[t] = carry
    targets = adv + v
    if squeeze:
        return adv[:, 0], targets[:, 0]
    return adv, targets


# --- PPO loss with analytic gradients -----------------------------------------


@dataclass
class MinibatchData:
    """One minibatch in network-input form.

    MLP: x (M, in), mask (M, A), actions/old_logp/adv (M,), targets (M, C).
    GRU: x (T, B, in), starts (T, B), h0 (B, h), mask (T, B, A),
         actions/old_logp/adv (T, B), targets (T, B, C).
    """

    x: np.ndarray
    actions: np.ndarray
    old_logp: np.ndarray
    adv: np.ndarray
    targets: np.ndarray
    mask: np.ndarray
    starts: np.ndarray | None = None
    h0: np.ndarray | None = None


def ppo_loss_and_grad(net: ActorCritic, params: np.ndarray, data: MinibatchData, cfg: PPOConfig):
    """Clipped-surrogate PPO loss (plus value, entropy, and two-critic
    discrepancy terms) and its exact gradient. Returns (loss, grad, metrics)."""
    p = net.views(params)
    recurrent = net.cfg.torso == "gru"
    if recurrent:
        logits, values, _, cache = net.gru_forward(p, data.x, data.h0, data.starts)
    else:
        logits, values, cache = net.mlp_forward(p, data.x)

    flat = lambda a: a.reshape(-1, a.shape[-1]) if a.ndim > 2 else a
    logits2 = flat(logits)
    values2 = values.reshape(-1, net.cfg.n_critics)
    mask2 = flat(data.mask).astype(bool)
    actions = data.actions.reshape(-1)
    old_logp = data.old_logp.reshape(-1)
    adv = data.adv.reshape(-1)
    targets = data.targets.reshape(-1, net.cfg.n_critics)
    M = actions.shape[0]
    rows = np.arange(M)

    logp, probs = masked_log_softmax(logits2, mask2)
    new_logp = logp[rows, actions]
    entropy = masked_entropy(logp, probs)
    ratio = np.exp(new_logp - old_logp)
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surr = ratio * adv
    surr_clip = clipped * adv
    policy_loss = -np.minimum(surr, surr_clip).mean()
    mean_entropy = entropy.mean()

    verrs = values2 - targets
    value_loss = (verrs**2).mean(axis=0).sum()
    ld_loss = 0.0
    if net.cfg.n_critics == 2:
        vdiff = values2[:, 0] - values2[:, 1]
        ld_loss = float((vdiff**2).mean())

    loss = (
        policy_loss
        + cfg.vf_coeff * value_loss
        - cfg.entropy_coeff * mean_entropy
        + cfg.ld_weight * ld_loss
    )
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss (policy={policy_loss}, value={value_loss}, "
            f"entropy={mean_entropy}, ld={ld_loss})"
        )

    # d(policy)/dlogits: only rows where the unclipped branch is active
    active = (surr <= surr_clip).astype(np.float64)
    coef = -(adv * ratio * active) / M
    dlogits2 = probs * -coef[:, None]
    dlogits2[rows, actions] += coef
    # d(-entropy_coeff * H)/dlogits
    safe_logp = np.where(probs > 0.0, logp, 0.0)
    dlogits2 += cfg.entropy_coeff * probs * (safe_logp + entropy[:, None]) / M

    dvalues2 = cfg.vf_coeff * 2.0 * verrs / M
    if net.cfg.n_critics == 2 and cfg.ld_weight != 0.0:
        vdiff = values2[:, 0] - values2[:, 1]
        dvalues2[:, 0] += cfg.ld_weight * 2.0 * vdiff / M
        dvalues2[:, 1] -= cfg.ld_weight * 2.0 * vdiff / M

    if recurrent:
        T, B, _ = data.x.shape
        grad = net.gru_backward(
            p, cache, dlogits2.reshape(T, B, -1), dvalues2.reshape(T, B, -1)
        )
    else:
        grad = net.mlp_backward(p, cache, dlogits2, dvalues2)

    metrics = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(mean_entropy),
        "ld_loss": float(ld_loss),
        "clip_fraction": float((np.abs(ratio - 1.0) > cfg.clip_eps).mean()),
    }
    return float(loss), grad, metrics


# --- optimizer ----------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.sqrt((grad**2).sum()))
    if max_norm > 0.0 and norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad**2
    mhat = state.m / (1.0 - beta1**state.t)
    vhat = state.v / (1.0 - beta2**state.t)
    return params - lr * mhat / (np.sqrt(vhat) + eps)


# --- training loop -------------------------------------------------------------


@dataclass
class TrainResult:
    params: np.ndarray
    net: ActorCritic
    episodes: list[tuple[int, float, float]]  # (env_step, discounted, undiscounted)
    metrics: dict
    config: PPOConfig
    agent_kind: str


def _one_hot(indices: np.ndarray, depth: int) -> np.ndarray:
    out = np.zeros((indices.shape[0], depth), dtype=np.float64)
    live = indices >= 0
    out[np.flatnonzero(live), indices[live]] = 1.0
    return out


def train(
    config_or_id,
    level: ObservabilityLevel,
    agent_kind: str,
    cfg: PPOConfig,
    seed: int,
    workers: int = 1,
) -> TrainResult:
    """Run PPO for cfg.total_steps env steps; deterministic given seed."""
    if agent_kind not in AGENT_KINDS:
        raise ConfigError(f"unknown agent kind {agent_kind!r}; valid: {', '.join(AGENT_KINDS)}")
    if cfg.double_critic != (agent_kind == "ld"):
        raise ConfigError("double_critic is enabled exactly when the agent kind is 'ld'")

    batch = EnvBatch(config_or_id, level, cfg.num_envs, seed, workers=workers)
    N, T = cfg.num_envs, cfg.num_steps
    gamma = batch.gamma if cfg.gamma is None else cfg.gamma
    recurrent = agent_kind in ("rnn", "ld")
    if recurrent and N % cfg.num_minibatches != 0:
        raise ConfigError("recurrent agents need num_envs divisible by num_minibatches")
    if not recurrent and (N * T) % cfg.num_minibatches != 0:
        raise ConfigError("num_envs * num_steps must be divisible by num_minibatches")

    input_dim = batch.obs_dim + (batch.action_dim if cfg.action_concat else 0)
    net = ActorCritic(agent_net_config(agent_kind, input_dim, batch.action_dim, cfg.hidden_size))
    params = net.init_params(RngStream(seed, STREAM_PARAM_INIT))
    action_rng = RngStream(seed, STREAM_ACTION_SAMPLING)
    shuffle_rng = RngStream(seed, STREAM_MINIBATCH_SHUFFLE)
    adam = AdamState.zeros(net.n_params)
    n_critics = net.cfg.n_critics
    hsz = cfg.hidden_size
    A = batch.action_dim

    obs, mask = batch.reset()
    obs = obs.copy()
    mask = mask.copy()
    start_flags = np.ones(N, dtype=np.float64)
    prev_action = np.full(N, -1, dtype=np.int64)
    h = np.zeros((N, hsz), dtype=np.float64)

    acc_disc = [DiscountedReturnAccumulator(gamma) for _ in range(N)]
    acc_undisc = np.zeros(N, dtype=np.float64)
    episodes: list[tuple[int, float, float]] = []

    buf_x = np.zeros((T, N, input_dim))
    buf_mask = np.zeros((T, N, A), dtype=np.bool_)
    buf_starts = np.zeros((T, N))
    buf_actions = np.zeros((T, N), dtype=np.int64)
    buf_logp = np.zeros((T, N))
    buf_reward = np.zeros((T, N))
    buf_term = np.zeros((T, N))
    buf_trunc = np.zeros((T, N))
    buf_values = np.zeros((T, N, n_critics))
    buf_trunc_values = np.zeros((T, N, n_critics))

    num_updates = cfg.total_steps // (N * T)
    last_metrics: dict = {}
    env_steps_done = 0

    def net_input(o: np.ndarray, prev_a: np.ndarray) -> np.ndarray:
        if not cfg.action_concat:
            return o
        return np.concatenate([o, _one_hot(prev_a, A)], axis=1)

    for update in range(num_updates):
        frac = 1.0 - update / num_updates
        lr_now = cfg.lr * frac if cfg.anneal_lr else cfg.lr
        h_rollout_start = h.copy()
        p = net.views(params)  # params are fixed while collecting

        for t in range(T):
            x = net_input(obs, prev_action)
            buf_x[t] = x
            buf_mask[t] = mask
            buf_starts[t] = start_flags
            if recurrent:
                h_in = h * (1.0 - start_flags)[:, None]
                logits, values, h = net.gru_step(p, x, h_in)
            else:
                logits, values, _ = net.mlp_forward(p, x)
            actions, logp = sample_masked(logits, mask, action_rng)
            buf_actions[t] = actions
            buf_logp[t] = logp
            buf_values[t] = values

            result = batch.step(actions)
            buf_reward[t] = result.reward
            buf_term[t] = result.terminated
            buf_trunc[t] = result.truncated

            trunc_rows = np.flatnonzero(result.truncated)
            if len(trunc_rows):
                x_fin = net_input(result.final_obs[trunc_rows], actions[trunc_rows])
                if recurrent:
                    _, v_fin, _ = net.gru_step(p, x_fin, h[trunc_rows])
                else:
                    _, v_fin, _ = net.mlp_forward(p, x_fin)
                buf_trunc_values[t, trunc_rows] = v_fin

            done_now = result.terminated | result.truncated
            for i in range(N):
                acc_disc[i].add(result.reward[i])
                acc_undisc[i] += result.reward[i]
                if done_now[i]:
                    episodes.append(
                        (env_steps_done + (t + 1) * N, acc_disc[i].total, float(acc_undisc[i]))
                    )
                    acc_disc[i].reset()
                    acc_undisc[i] = 0.0

            obs = result.obs.copy()
            mask = result.mask.copy()
            start_flags = done_now.astype(np.float64)
            prev_action = np.where(done_now, -1, actions)

        env_steps_done += T * N

        # bootstrap values of the observation after the rollout's last step
        x_boot = net_input(obs, prev_action)
        if recurrent:
            h_boot = h * (1.0 - start_flags)[:, None]
            _, boot_values, _ = net.gru_step(p, x_boot, h_boot)
        else:
            _, boot_values, _ = net.mlp_forward(p, x_boot)

        lambdas = (cfg.lambda0, cfg.lambda1)
        advs = np.zeros((T, N, n_critics))
        targets = np.zeros((T, N, n_critics))
        for j in range(n_critics):
            advs[:, :, j], targets[:, :, j] = gae(
                buf_reward,
                buf_values[:, :, j],
                buf_term,
                buf_trunc,
                boot_values[:, j],
                gamma,
                lambdas[j],
                truncation_values=buf_trunc_values[:, :, j],
            )
        policy_adv = advs[:, :, 0] if n_critics == 1 else (
            cfg.alpha * advs[:, :, 0] + (1.0 - cfg.alpha) * advs[:, :, 1]
        )

        for _ in range(cfg.update_epochs):
            if recurrent:
                perm = shuffle_rng.permutation(N)
                group = N // cfg.num_minibatches
                for mb in range(cfg.num_minibatches):
                    envs_mb = np.array(perm[mb * group : (mb + 1) * group])
                    adv_mb = policy_adv[:, envs_mb]
                    if cfg.adv_norm:
                        adv_mb = (adv_mb - adv_mb.mean()) / (adv_mb.std() + 1e-8)
                    data = MinibatchData(
                        x=buf_x[:, envs_mb],
                        actions=buf_actions[:, envs_mb],
                        old_logp=buf_logp[:, envs_mb],
                        adv=adv_mb,
                        targets=targets[:, envs_mb],
                        mask=buf_mask[:, envs_mb],
                        starts=buf_starts[:, envs_mb],
                        h0=h_rollout_start[envs_mb],
                    )
                    loss, grad, last_metrics = ppo_loss_and_grad(net, params, data, cfg)
                    grad, last_metrics["grad_norm"] = clip_grad_norm(grad, cfg.max_grad_norm)
                    params = adam_step(params, grad, adam, lr_now)
            else:
                M = T * N
                perm = np.array(shuffle_rng.permutation(M))
                group = M // cfg.num_minibatches
                flat_x = buf_x.reshape(M, input_dim)
                flat_mask = buf_mask.reshape(M, A)
                flat_actions = buf_actions.reshape(M)
                flat_logp = buf_logp.reshape(M)
                flat_adv = policy_adv.reshape(M)
                flat_targets = targets.reshape(M, n_critics)
                for mb in range(cfg.num_minibatches):
                    idx = perm[mb * group : (mb + 1) * group]
                    adv_mb = flat_adv[idx]
                    if cfg.adv_norm:
                        adv_mb = (adv_mb - adv_mb.mean()) / (adv_mb.std() + 1e-8)
                    data = MinibatchData(
                        x=flat_x[idx],
                        actions=flat_actions[idx],
                        old_logp=flat_logp[idx],
                        adv=adv_mb,
                        targets=flat_targets[idx],
                        mask=flat_mask[idx],
                    )
                    loss, grad, last_metrics = ppo_loss_and_grad(net, params, data, cfg)
                    grad, last_metrics["grad_norm"] = clip_grad_norm(grad, cfg.max_grad_norm)
                    params = adam_step(params, grad, adam, lr_now)

    batch.close()
    last_metrics["env_steps"] = env_steps_done
    last_metrics["episodes"] = len(episodes)
    return TrainResult(
        params=params,
        net=net,
        episodes=episodes,
        metrics=last_metrics,
        config=cfg,
        agent_kind=agent_kind,
    )


def run_episodes(
    result_or_params,
    net: ActorCritic | None,
    config_or_id,
    level: ObservabilityLevel,
    n_episodes: int,
    seed: int,
    action_concat: bool = False,
    greedy: bool = True,
) -> list[tuple[float, float]]:
    """Roll out full episodes with a trained policy; returns
    (discounted, undiscounted) per episode. greedy=True takes the masked
    argmax action; otherwise samples."""
    if isinstance(result_or_params, TrainResult):
        params = result_or_params.params
        net = result_or_params.net
        action_concat = result_or_params.config.action_concat
    else:
        params = result_or_params
        if net is None:
            raise ContractError("net required when passing a raw parameter vector")
    p = net.views(params)
    recurrent = net.cfg.torso == "gru"
    batch = EnvBatch(config_or_id, level, 1, seed)
    rng = RngStream(seed, STREAM_ACTION_SAMPLING)
    out: list[tuple[float, float]] = []
    obs, mask = batch.reset()
    for _ in range(n_episodes):
        h = np.zeros((1, net.cfg.hidden_size))
        prev_a = np.full(1, -1, dtype=np.int64)
        acc = DiscountedReturnAccumulator(batch.gamma)
        undisc = 0.0
        while True:
            x = obs if not action_concat else np.concatenate(
                [obs, _one_hot(prev_a, batch.action_dim)], axis=1
            )
            if recurrent:
                logits, _, h = net.gru_step(p, x, h)
            else:
                logits, _, _ = net.mlp_forward(p, x)
            if greedy:
                masked = np.where(mask, logits, -np.inf)
                actions = np.array([int(np.argmax(masked[0]))])
            else:
                actions, _ = sample_masked(logits, mask, rng)
            result = batch.step(actions)
            acc.add(float(result.reward[0]))
            undisc += float(result.reward[0])
            done = bool(result.terminated[0] or result.truncated[0])
            obs = result.obs.copy()
            mask = result.mask.copy()
            prev_a = actions
            if done:
                out.append((acc.total, undisc))
                break
    batch.close()
    return out


# --- checkpoints ---------------------------------------------------------------

_CKPT_MAGIC = b"MEMGAPC1"


def save_checkpoint(path, params: np.ndarray, fingerprint: str) -> None:
    fp = fingerprint.encode()
    data = params.astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<I", len(fp)))
        f.write(fp)
        f.write(struct.pack("<Q", params.shape[0]))
        f.write(data)


def load_checkpoint(path) -> tuple[np.ndarray, str]:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _CKPT_MAGIC:
            raise ConfigError(f"not a checkpoint file (magic {magic!r})")
        (fp_len,) = struct.unpack("<I", f.read(4))
        fingerprint = f.read(fp_len).decode()
        (n,) = struct.unpack("<Q", f.read(8))
        params = np.frombuffer(f.read(n * 8), dtype="<f8").copy()
    if params.shape[0] != n:
        raise ConfigError("checkpoint truncated")
    return params, fingerprint
