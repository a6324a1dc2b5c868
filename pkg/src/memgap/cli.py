"""Command-line front end.

Subcommands:
  env-info   print an environment's capabilities as key=value lines
  train      train one agent and print a short summary
  protocol   run the memory-improvability protocol from a spec file
  bench      batched-stepping throughput sweep, CSV output
  trace      deterministic scripted-policy trajectory dump (parity oracle)
  serve      JSON-lines environment server on stdin/stdout for bindings

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
Config and spec files are flat ``key=value`` lines; ``#`` starts a comment.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import types
import typing

import numpy as np

from .core import (
    STREAM_TRACE_BASE,
    ConfigError,
    ContractError,
    EnvError,
    ObservabilityLevel,
    RngStream,
)
from .agents import PPOConfig, TrainingError, save_checkpoint, train
from .harness import ProtocolSpec, ROLES, run_fingerprint, run_protocol
from .registry import ENV_FAMILIES, make_config
from .vector import CSV_HEADER, EnvBatch, run_throughput

_PPO_HINTS = typing.get_type_hints(PPOConfig)
_SPEC_HINTS = typing.get_type_hints(ProtocolSpec)
_PPO_FIELDS = {f.name for f in dataclasses.fields(PPOConfig)}


def _coerce(name: str, hint, raw: str):
    """Parse a key=value string into the dataclass field's type."""
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):  # e.g. float | None
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("none", "null"):
            return None
        hint = args[0]
    if hint is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if hint is int:
        return int(float(raw)) if ("e" in raw.lower() or "." in raw) else int(raw)
    if hint is float:
        return float(raw)
    return raw


def _parse_kv_lines(text: str, source: str) -> list[tuple[int, str, str]]:
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {line_no}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        entries.append((line_no, key.strip(), value.strip()))
    return entries


def parse_ppo_overrides(pairs, source: str = "--set") -> dict:
    """Turn key=value strings into PPOConfig field overrides."""
    out = {}
    for raw in pairs:
        if "=" not in raw:
            raise ConfigError(f"{source}: expected key=value, got {raw!r}")
        key, value = raw.split("=", 1)
        key = key.strip()
        if key not in _PPO_FIELDS:
            raise ConfigError(f"{source}: unknown training option {key!r}")
        out[key] = _coerce(key, _PPO_HINTS[key], value.strip())
    return out


def parse_protocol_spec(text: str, source: str = "<spec>") -> ProtocolSpec:
    """Build a ProtocolSpec from flat key=value lines.

    Bare PPOConfig fields apply to every role; ``<role>.field=value`` scopes
    an override to one role, and a comma-separated value list turns the field
    into that role's sweep grid.
    """
    spec_fields: dict = {}
    overrides: dict = {}
    role_overrides: dict = {}
    role_grids: dict = {}
    for line_no, key, value in _parse_kv_lines(text, source):
        where = f"{source}: line {line_no}"
        if "." in key:
            role, field = key.split(".", 1)
            if role not in ROLES:
                raise ConfigError(f"{where}: unknown role {role!r}; valid: {', '.join(ROLES)}")
            if field not in _PPO_FIELDS:
                raise ConfigError(f"{where}: unknown training option {field!r}")
            values = [v.strip() for v in value.split(",") if v.strip()]
            if not values:
                raise ConfigError(f"{where}: empty value for {key}")
            coerced = [_coerce(field, _PPO_HINTS[field], v) for v in values]
            if len(coerced) == 1:
                role_overrides.setdefault(role, {})[field] = coerced[0]
            else:
                role_grids.setdefault(role, {})[field] = tuple(coerced)
        elif key == "memory_agents":
            spec_fields[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _SPEC_HINTS and key not in ("overrides", "role_overrides", "role_grids"):
            spec_fields[key] = _coerce(key, _SPEC_HINTS[key], value)
        elif key in _PPO_FIELDS:
            overrides[key] = _coerce(key, _PPO_HINTS[key], value)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    if "env_id" not in spec_fields:
        raise ConfigError(f"{source}: missing required key env_id")
    try:
        return ProtocolSpec(
            **spec_fields,
            overrides=overrides,
            role_overrides=role_overrides,
            role_grids=role_grids,
        )
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


# --- subcommands ------------------------------------------------------------------


def cmd_env_info(args) -> int:
    config = make_config(args.env)
    caps = config.capabilities()
    print(f"env={args.env}")
    print(f"levels={','.join(lv.value for lv in caps.levels)}")
    for level in caps.levels:
        print(f"obs_dim.{level.value}={caps.obs_dims[level]}")
    print(f"action_dim={caps.action_dim}")
    print(f"reward_min={caps.reward_range[0]!r}")
    print(f"reward_max={caps.reward_range[1]!r}")
    print(f"gamma={caps.gamma!r}")
    print(f"max_steps={caps.max_steps}")
    return 0


def cmd_train(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config) as f:
            text = f.read()
        pairs = [f"{k}={v}" for _, k, v in _parse_kv_lines(text, args.config)]
        overrides.update(parse_ppo_overrides(pairs, source=args.config))
    overrides.update(parse_ppo_overrides(args.set or []))
    cfg = PPOConfig(**overrides)
    level = ObservabilityLevel.parse(args.level)
    seed = cfg.seed if args.seed is None else args.seed
    result = train(make_config(args.env), level, args.agent, cfg, seed, workers=args.workers)

    print(f"env={args.env}")
    print(f"level={level.value}")
    print(f"agent={args.agent}")
    print(f"seed={seed}")
    print(f"episodes={len(result.episodes)}")
    if result.episodes:
        tail = result.episodes[-min(100, len(result.episodes)):]
        print(f"final_return={float(np.mean([e[1] for e in tail]))!r}")
        print(f"final_undiscounted={float(np.mean([e[2] for e in tail]))!r}")
    if cfg.save_checkpoints:
        path = args.checkpoint or f"checkpoint_{args.env}_{args.agent}_seed{seed}.bin"
        save_checkpoint(path, result.params, run_fingerprint(args.env, level, args.agent, cfg))
        print(f"checkpoint={path}")
    return 0


def cmd_protocol(args) -> int:
    with open(args.spec) as f:
        spec = parse_protocol_spec(f.read(), source=args.spec)
    report = run_protocol(spec, out_dir=args.out, workers=args.workers)
    sys.stdout.write(report.to_text())
    return 0


def cmd_bench(args) -> int:
    config = make_config(args.env)
    level = ObservabilityLevel.parse(args.level)
    sizes = [int(v) for v in args.num_envs.split(",") if v.strip()]
    if not sizes or any(n < 1 for n in sizes):
        raise ConfigError(f"--num-envs must list positive integers, got {args.num_envs!r}")
    reports = run_throughput(config, level, sizes, args.steps, seed=args.seed, workers=args.workers)
    lines = [CSV_HEADER] + [r.csv_row() for r in reports]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(text)
    return 0


def _format_bits(vec: np.ndarray) -> str:
    rounded = np.rint(vec)
    if np.abs(vec - rounded).max() <= 1e-12 and rounded.min() >= 0 and rounded.max() <= 1:
        return "".join("1" if b else "0" for b in rounded.astype(bool))
    return ",".join(f"{v:.6f}" for v in vec)


def cmd_trace(args) -> int:
    config = make_config(args.env)
    level = ObservabilityLevel.parse(args.level)
    batch = EnvBatch(config, level, num_envs=args.num_envs, seed=args.seed)
    policy_rngs = [
        RngStream(args.seed, STREAM_TRACE_BASE + i) for i in range(args.num_envs)
    ]
    obs, mask = batch.reset()
    out = sys.stdout
    for t in range(args.steps):
        actions = np.empty(args.num_envs, dtype=np.int64)
        for i in range(args.num_envs):
            legal = np.flatnonzero(mask[i])
            actions[i] = int(legal[policy_rngs[i].next_u64() % len(legal)])
        step = batch.step(actions)
        for i in range(args.num_envs):
            out.write(
                f"step={t} env={i} action={int(actions[i])} "
                f"reward={float(step.reward[i]):.6f} "
                f"terminated={int(step.terminated[i])} "
                f"truncated={int(step.truncated[i])} "
                f"obs={_format_bits(step.obs[i])} "
                f"mask={_format_bits(step.mask[i])}\n"
            )
        obs, mask = step.obs, step.mask
    batch.close()
    return 0


def cmd_serve(args) -> int:
    """JSON-lines environment server: one request object per line on stdin,
    one response per line on stdout. Ops: make, reset, step, obs_dims, close."""
    batches: dict[int, EnvBatch] = {}
    next_handle = 0
    stdin = sys.stdin
    stdout = sys.stdout

    def reply(payload: dict) -> None:
        stdout.write(json.dumps(payload, separators=(",", ":")) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            op = req["op"]
            if op == "make":
                config = make_config(req["env"])
                level = ObservabilityLevel.parse(req["level"])
                batch = EnvBatch(
                    config, level, num_envs=int(req["num_envs"]), seed=int(req["seed"])
                )
                handle = next_handle
                next_handle += 1
                batches[handle] = batch
                reply(
                    {
                        "ok": True,
                        "handle": handle,
                        "obs_dim": batch.obs_dim,
                        "action_dim": batch.action_dim,
                        "num_envs": batch.num_envs,
                        "gamma": batch.gamma,
                    }
                )
            elif op == "reset":
                obs, mask = batches[req["handle"]].reset()
                reply({"ok": True, "obs": obs.tolist(), "mask": mask.astype(int).tolist()})
            elif op == "step":
                batch = batches[req["handle"]]
                actions = np.asarray(req["actions"], dtype=np.int64)
                step = batch.step(actions)
                reply(
                    {
                        "ok": True,
                        "obs": step.obs.tolist(),
                        "reward": step.reward.tolist(),
                        "terminated": step.terminated.astype(int).tolist(),
                        "truncated": step.truncated.astype(int).tolist(),
                        "mask": step.mask.astype(int).tolist(),
                        "final_obs": step.final_obs.tolist(),
                    }
                )
            elif op == "obs_dims":
                caps = make_config(req["env"]).capabilities()
                reply(
                    {
                        "ok": True,
                        "obs_dims": {lv.value: caps.obs_dims[lv] for lv in caps.levels},
                        "action_dim": caps.action_dim,
                    }
                )
            elif op == "close":
                batch = batches.pop(req["handle"], None)
                if batch is not None:
                    batch.close()
                reply({"ok": True})
            else:
                reply({"ok": False, "error": f"unknown op {op!r}"})
        except (KeyError, ValueError, TypeError, EnvError) as exc:
            reply({"ok": False, "error": f"{type(exc).__name__}: {exc}"})
    for batch in batches.values():
        batch.close()
    return 0


# --- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memgap",
        description="Batched partially observable environments and the "
        "memory-improvability training protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("env-info", help="print environment capabilities")
    p.add_argument("env", help=f"environment id, families: {', '.join(ENV_FAMILIES)}")
    p.set_defaults(fn=cmd_env_info)

    p = sub.add_parser("train", help="train one agent")
    p.add_argument("--env", required=True)
    p.add_argument("--level", default="partial")
    p.add_argument("--agent", default="memoryless", choices=("memoryless", "rnn", "ld"))
    p.add_argument("--seed", type=int, default=None,
                   help="run seed (default: the seed training option)")
    p.add_argument("--config", help="key=value file of training options")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one training option (repeatable)")
    p.add_argument("--checkpoint", help="where to save final parameters")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("protocol", help="run the memory-improvability protocol")
    p.add_argument("--spec", required=True, help="protocol spec file (key=value lines)")
    p.add_argument("--out", help="directory for run records and reports")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_protocol)

    p = sub.add_parser("bench", help="throughput sweep over batch sizes")
    p.add_argument("--env", required=True)
    p.add_argument("--level", default="partial")
    p.add_argument("--num-envs", default="1,256", help="comma-separated batch sizes")
    p.add_argument("--steps", type=int, default=100_000, help="environment-step budget per size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="also write the CSV here")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("trace", help="scripted-policy trajectory dump")
    p.add_argument("--env", required=True)
    p.add_argument("--level", default="partial")
    p.add_argument("--num-envs", type=int, default=1)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("serve", help="JSON-lines environment server for bindings")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ContractError, EnvError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
