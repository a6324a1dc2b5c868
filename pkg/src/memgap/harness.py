"""Memory-improvability evaluation: floor/ceiling/memory runs, AUC selection,
multi-seed confidence intervals, and the gap report.

The protocol trains three kinds of agents on one environment:
  floor    memoryless agent on Partial observations
  ceiling  memoryless agent on FullState, or a recurrent agent on
           PerfectMemory when the environment has no FullState encoding
  memory   recurrent agent (optionally also the two-critic variant) on
           Partial observations

Each role first sweeps its hyperparameter grid over n_sweep seeds, picks the
configuration with the highest area under the mean learning curve, then reruns
it over n_final fresh seeds. The gap is the difference of ceiling and floor
AUCs; the environment counts as memory improvable when the bootstrap 95%
interval of that gap excludes zero.

Run records are plain text, one completed episode per line, and contain no
wall-clock data, so rerunning a protocol with the same master seed reproduces
every file byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.signal import savgol_filter
from scipy.stats import t as student_t

from .core import ConfigError, ContractError, ObservabilityLevel, derive_seed
from .agents import PPOConfig, TrainResult, train
from .registry import make_config

CURVE_POINTS = 512
_BOOTSTRAP_RESAMPLES = 10_000
_BOOTSTRAP_SEED = 0x5EED
_FINAL_SEED_LABEL = 0xF1A1
_FINAL_WINDOW_FRACTION = 0.1

ROLES = ("floor", "ceiling", "rnn", "ld")


def config_fingerprint(mapping: dict) -> str:
    """12 hex chars identifying a configuration, stable across processes."""
    canon = "".join(f"{k}={mapping[k]!r}\n" for k in sorted(mapping))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


@dataclass
class RunRecord:
    """Per-seed training log: one (env_step, returns) point per completed episode."""

    fingerprint: str
    seed: int
    series: list[tuple[int, float, float]]  # (env_step, discounted, undiscounted)

    def to_text(self) -> str:
        out = io.StringIO()
        for step, disc, undisc in self.series:
            out.write(
                f"fingerprint={self.fingerprint} seed={self.seed} "
                f"env_step={step} return={disc!r} undiscounted={undisc!r}\n"
            )
        return out.getvalue()


def write_run_record(path, record: RunRecord) -> None:
    with open(path, "w") as f:
        f.write(record.to_text())


def read_run_record(path) -> RunRecord:
    fingerprint = ""
    seed = 0
    series = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                kv = dict(part.split("=", 1) for part in line.split())
                fingerprint = kv["fingerprint"]
                seed = int(kv["seed"])
                series.append((int(kv["env_step"]), float(kv["return"]), float(kv["undiscounted"])))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"{path}: line {line_no}: malformed run record ({exc})") from None
    return RunRecord(fingerprint=fingerprint, seed=seed, series=series)


# --- curves and AUC -------------------------------------------------------------


def resample_curve(
    series, total_steps: int, n_points: int = CURVE_POINTS, metric: str = "discounted"
) -> np.ndarray:
    """Hold-previous resampling of episode returns onto a uniform step grid.

    Points before the first completed episode take that episode's value; an
    empty series resamples to all zeros.
    """
    if metric not in ("discounted", "undiscounted"):
        raise ConfigError(f"metric must be 'discounted' or 'undiscounted', got {metric!r}")
    if not series:
        return np.zeros(n_points)
    steps = np.array([s[0] for s in series], dtype=np.float64)
    col = 1 if metric == "discounted" else 2
    vals = np.array([s[col] for s in series], dtype=np.float64)
    grid = np.linspace(0.0, float(total_steps), n_points)
    idx = np.clip(np.searchsorted(steps, grid, side="right") - 1, 0, len(vals) - 1)
    return vals[idx]


def curve_auc(curve: np.ndarray) -> float:
    """Trapezoidal area under a uniform-grid curve, normalized by the span,
    so a constant curve at c has AUC exactly c."""
    if len(curve) < 2:
        return float(curve[0]) if len(curve) else 0.0
    return float(np.trapezoid(curve, dx=1.0 / (len(curve) - 1)))


def auc_select(
    grouped: dict[str, list[RunRecord]], total_steps: int, metric: str = "discounted"
) -> str:
    """Fingerprint with the highest AUC of the mean-over-seeds curve.

    Ties break toward the lexicographically smallest fingerprint.
    """
    if not grouped:
        raise ContractError("auc_select needs at least one configuration")
    best_fp = None
    best_auc = -np.inf
    for fp in sorted(grouped):
        records = grouped[fp]
        if not records:
            raise ContractError(f"configuration {fp} has no runs")
        curves = [resample_curve(r.series, total_steps, metric=metric) for r in records]
        score = curve_auc(np.mean(curves, axis=0))
        if score > best_auc:
            best_fp, best_auc = fp, score
    return best_fp


def smooth_curve(curve: np.ndarray, window: int = 31, polyorder: int = 3) -> np.ndarray:
    """Savitzky-Golay smoothing for presentation only; never feed the result
    into AUC selection or confidence intervals. Window is forced odd."""
    window = min(window | 1, len(curve) | 1)
    if window <= polyorder:
        return curve.copy()
    return savgol_filter(curve, window_length=window, polyorder=polyorder)


# --- statistics ------------------------------------------------------------------


def confidence_interval(values, level: float = 0.95) -> tuple[float, float, float]:
    """Student-t interval for the mean: (mean, lo, hi). Needs >= 2 values."""
    arr = np.asarray(values, dtype=np.float64)
    n = len(arr)
    if n < 2:
        raise ContractError(f"confidence interval needs >= 2 values, got {n}")
    mean = float(arr.mean())
    sem = float(arr.std(ddof=1) / np.sqrt(n))
    tq = float(student_t.ppf(0.5 + level / 2.0, n - 1))
    return mean, mean - tq * sem, mean + tq * sem


def _bootstrap_ci(stat_fn, groups, level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap over seeds, resampling each group independently."""
    rng = np.random.default_rng(_BOOTSTRAP_SEED)
    stats = np.empty(_BOOTSTRAP_RESAMPLES)
    for b in range(_BOOTSTRAP_RESAMPLES):
        sample = [g[rng.integers(0, len(g), size=len(g))] for g in groups]
        stats[b] = stat_fn(sample)
    # a stat may be undefined on some resamples (e.g. closure when the
    # resampled gap is non-positive); drop those rather than poisoning the CI
    valid = stats[~np.isnan(stats)]
    if len(valid) == 0:
        return float("nan"), float("nan")
    lo, hi = np.percentile(valid, [50 * (1 - level), 50 * (1 + level)])
    return float(lo), float(hi)


@dataclass
class GapReport:
    auc_floor: float
    auc_ceiling: float
    auc_memory: dict[str, float]  # per memory agent kind
    gap: float
    gap_ci: tuple[float, float]
    closure: dict[str, float | None]
    closure_ci: dict[str, tuple[float, float] | None]
    memory_improvable: bool

    def to_text(self) -> str:
        lines = [
            f"auc_floor={self.auc_floor!r}",
            f"auc_ceiling={self.auc_ceiling!r}",
            f"gap={self.gap!r}",
            f"gap_ci_lo={self.gap_ci[0]!r}",
            f"gap_ci_hi={self.gap_ci[1]!r}",
            f"memory_improvable={'true' if self.memory_improvable else 'false'}",
        ]
        for kind in sorted(self.auc_memory):
            lines.append(f"auc_memory.{kind}={self.auc_memory[kind]!r}")
            closure = self.closure[kind]
            lines.append(f"closure.{kind}={'none' if closure is None else repr(closure)}")
            ci = self.closure_ci[kind]
            if ci is not None:
                lines.append(f"closure_ci_lo.{kind}={ci[0]!r}")
                lines.append(f"closure_ci_hi.{kind}={ci[1]!r}")
        return "\n".join(lines) + "\n"


def improvability_gap(
    floor_curves: np.ndarray,
    ceiling_curves: np.ndarray,
    memory_curves: dict[str, np.ndarray],
) -> GapReport:
    """Gap and closure statistics from per-seed curves (rows are seeds).

    gap = AUC(ceiling) - AUC(floor) on mean per-seed AUCs, with a bootstrap
    95% interval over seeds; closure = (AUC(memory) - AUC(floor)) / gap.
    A non-positive gap reports not-memory-improvable rather than erroring.
    """
    floor_aucs = np.array([curve_auc(c) for c in np.atleast_2d(floor_curves)])
    ceiling_aucs = np.array([curve_auc(c) for c in np.atleast_2d(ceiling_curves)])
    memory_aucs = {
        kind: np.array([curve_auc(c) for c in np.atleast_2d(curves)])
        for kind, curves in memory_curves.items()
    }

    gap = float(ceiling_aucs.mean() - floor_aucs.mean())
    gap_ci = _bootstrap_ci(
        lambda g: g[1].mean() - g[0].mean(), [floor_aucs, ceiling_aucs]
    )
    improvable = gap > 0.0 and gap_ci[0] > 0.0

    closure: dict[str, float | None] = {}
    closure_ci: dict[str, tuple[float, float] | None] = {}
    for kind, aucs in memory_aucs.items():
        if gap <= 0.0:
            closure[kind] = None
            closure_ci[kind] = None
            continue
        closure[kind] = float((aucs.mean() - floor_aucs.mean()) / gap)

        def closure_stat(sample):
            f, c, m = sample
            g = c.mean() - f.mean()
            return (m.mean() - f.mean()) / g if g > 0 else np.nan

        lo, hi = _bootstrap_ci(closure_stat, [floor_aucs, ceiling_aucs, aucs])
        closure_ci[kind] = (lo, hi)

    return GapReport(
        auc_floor=float(floor_aucs.mean()),
        auc_ceiling=float(ceiling_aucs.mean()),
        auc_memory={k: float(v.mean()) for k, v in memory_aucs.items()},
        gap=gap,
        gap_ci=gap_ci,
        closure=closure,
        closure_ci=closure_ci,
        memory_improvable=improvable,
    )


# --- protocol --------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """One role's runs: agent kind, observability level, and its sweep grid."""

    role: str
    agent_kind: str
    level: ObservabilityLevel
    grid: tuple[dict, ...]  # PPOConfig field overrides, one dict per sweep point
    base: PPOConfig

    def config_at(self, point: dict) -> PPOConfig:
        return replace(self.base, **point)


@dataclass(frozen=True)
class ProtocolSpec:
    env_id: str
    total_steps: int
    seed: int = 2020
    n_sweep: int = 2
    n_final: int = 5
    num_envs: int = 4
    num_steps: int = 128
    hidden_size: int = 128
    metric: str = "discounted"
    memory_agents: tuple[str, ...] = ("rnn",)
    overrides: dict = field(default_factory=dict)  # applied to every role
    role_overrides: dict = field(default_factory=dict)  # role -> field -> value
    role_grids: dict = field(default_factory=dict)  # role -> field -> tuple of values

    def __post_init__(self) -> None:
        make_config(self.env_id)  # validate the id early
        for kind in self.memory_agents:
            if kind not in ("rnn", "ld"):
                raise ConfigError(f"memory agent must be 'rnn' or 'ld', got {kind!r}")
        for role in list(self.role_overrides) + list(self.role_grids):
            if role not in ROLES:
                raise ConfigError(f"unknown role {role!r}; valid: {', '.join(ROLES)}")
        if self.n_final < 2:
            raise ConfigError("n_final must be >= 2 for confidence intervals")


def _grid_points(grid_fields: dict) -> tuple[dict, ...]:
    """Cross product of {field: (v1, v2, ...)} into override dicts."""
    points = [{}]
    for name, values in grid_fields.items():
        points = [{**pt, name: v} for pt in points for v in values]
    return tuple(points)


def build_roles(spec: ProtocolSpec) -> list[ExperimentSpec]:
    env_config = make_config(spec.env_id)
    caps = env_config.capabilities()
    if ObservabilityLevel.FULL_STATE in caps.levels:
        ceiling_kind, ceiling_level = "memoryless", ObservabilityLevel.FULL_STATE
    elif ObservabilityLevel.PERFECT_MEMORY in caps.levels:
        ceiling_kind, ceiling_level = "rnn", ObservabilityLevel.PERFECT_MEMORY
    else:
        raise ConfigError(f"{spec.env_id} supports neither FullState nor PerfectMemory")

    role_defs = [("floor", "memoryless", ObservabilityLevel.PARTIAL),
                 ("ceiling", ceiling_kind, ceiling_level)]
    for kind in spec.memory_agents:
        role_defs.append((kind, kind, ObservabilityLevel.PARTIAL))

    roles = []
    for role, kind, level in role_defs:
        base_fields = dict(
            num_envs=spec.num_envs,
            num_steps=spec.num_steps,
            hidden_size=spec.hidden_size,
            total_steps=spec.total_steps,
            double_critic=kind == "ld",
            # memory agents see their previous action, per the training setup
            action_concat=kind in ("rnn", "ld"),
        )
        base_fields.update(spec.overrides)
        base_fields.update(spec.role_overrides.get(role, {}))
        base = PPOConfig(**base_fields)
        grid = _grid_points(spec.role_grids.get(role, {}))
        roles.append(ExperimentSpec(role=role, agent_kind=kind, level=level, grid=grid, base=base))
    return roles


def run_fingerprint(env_id: str, level: ObservabilityLevel, kind: str, cfg: PPOConfig) -> str:
    mapping = {"env_id": env_id, "level": level.value, "agent": kind}
    for f in fields(PPOConfig):
        mapping[f.name] = getattr(cfg, f.name)
    return config_fingerprint(mapping)


def _execute_run(args) -> tuple[str, int, RunRecord]:
    env_id, level_value, kind, cfg, seed, fingerprint = args
    result: TrainResult = train(
        make_config(env_id), ObservabilityLevel(level_value), kind, cfg, seed
    )
    return fingerprint, seed, RunRecord(fingerprint=fingerprint, seed=seed, series=result.episodes)


@dataclass
class RoleResult:
    spec: ExperimentSpec
    best_fingerprint: str
    best_config: PPOConfig
    sweep_records: dict[str, list[RunRecord]]
    final_records: list[RunRecord]

    def final_curves(self, total_steps: int, metric: str) -> np.ndarray:
        return np.stack(
            [resample_curve(r.series, total_steps, metric=metric) for r in self.final_records]
        )


@dataclass
class ProtocolReport:
    spec: ProtocolSpec
    roles: dict[str, RoleResult]
    gap: GapReport

    def final_return_stats(self, role: str) -> tuple[float, float, float]:
        """Mean and 95% CI over seeds of the mean return in the last tenth
        of training."""
        finals = [
            _final_window_mean(r.series, self.spec.total_steps, self.spec.metric)
            for r in self.roles[role].final_records
        ]
        return confidence_interval(finals)

    def to_text(self) -> str:
        lines = [
            "protocol=memory_improvability",
            f"env={self.spec.env_id}",
            f"metric={self.spec.metric}",
            f"seed={self.spec.seed}",
            f"total_steps={self.spec.total_steps}",
            f"n_final={self.spec.n_final}",
        ]
        for role, rr in self.roles.items():
            mean, lo, hi = self.final_return_stats(role)
            lines += [
                f"[role {role}]",
                f"agent={rr.spec.agent_kind}",
                f"level={rr.spec.level.value}",
                f"fingerprint={rr.best_fingerprint}",
                f"final_mean={mean!r}",
                f"final_ci_lo={lo!r}",
                f"final_ci_hi={hi!r}",
                f"seeds={len(rr.final_records)}",
            ]
        lines.append("[gap]")
        lines.append(self.gap.to_text().rstrip("\n"))
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["role", "agent", "level", "fingerprint", "seed", "auc", "final_return"])
        for role, rr in self.roles.items():
            for rec in rr.final_records:
                curve = resample_curve(rec.series, self.spec.total_steps, metric=self.spec.metric)
                writer.writerow(
                    [
                        role,
                        rr.spec.agent_kind,
                        rr.spec.level.value,
                        rr.best_fingerprint,
                        rec.seed,
                        repr(curve_auc(curve)),
                        repr(_final_window_mean(rec.series, self.spec.total_steps, self.spec.metric)),
                    ]
                )
        return out.getvalue()


def _final_window_mean(series, total_steps: int, metric: str) -> float:
    """Mean return over episodes completed in the last tenth of training."""
    if not series:
        return 0.0
    col = 1 if metric == "discounted" else 2
    cutoff = (1.0 - _FINAL_WINDOW_FRACTION) * total_steps
    window = [s[col] for s in series if s[0] >= cutoff]
    if not window:
        window = [series[-1][col]]
    return float(np.mean(window))


def run_protocol(spec: ProtocolSpec, out_dir=None, workers: int = 1) -> ProtocolReport:
    """Sweep, select, rerun, and report for every role of the protocol."""
    roles = build_roles(spec)
    role_results: dict[str, RoleResult] = {}

    for role_idx, role in enumerate(roles):
        tasks = []
        grouped: dict[str, list[RunRecord]] = {}
        fp_to_config: dict[str, PPOConfig] = {}
        for cfg_idx, point in enumerate(role.grid):
            cfg = role.config_at(point)
            fp = run_fingerprint(spec.env_id, role.level, role.agent_kind, cfg)
            fp_to_config[fp] = cfg
            grouped[fp] = []
            for s in range(spec.n_sweep):
                seed = derive_seed(spec.seed, role_idx, cfg_idx, s)
                tasks.append((spec.env_id, role.level.value, role.agent_kind, cfg, seed, fp))

        if len(role.grid) > 1:
            for fp, seed, record in _run_tasks(tasks, workers):
                grouped[fp].append(record)
            best_fp = auc_select(grouped, spec.total_steps, metric=spec.metric)
        else:
            # single-point grid: the sweep is a pass-through
            best_fp = next(iter(grouped))
            grouped = {best_fp: []}
        best_cfg = fp_to_config[best_fp]

        final_tasks = [
            (
                spec.env_id,
                role.level.value,
                role.agent_kind,
                best_cfg,
                derive_seed(spec.seed, role_idx, _FINAL_SEED_LABEL, j),
                best_fp,
            )
            for j in range(spec.n_final)
        ]
        final_records = [rec for _, _, rec in _run_tasks(final_tasks, workers)]
        final_records.sort(key=lambda r: r.seed)

        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            for records in list(grouped.values()) + [final_records]:
                for rec in records:
                    write_run_record(
                        os.path.join(out_dir, f"{role.role}_{rec.fingerprint}_seed{rec.seed}.runrecord"),
                        rec,
                    )

        role_results[role.role] = RoleResult(
            spec=role,
            best_fingerprint=best_fp,
            best_config=best_cfg,
            sweep_records=grouped,
            final_records=final_records,
        )

    floor_curves = role_results["floor"].final_curves(spec.total_steps, spec.metric)
    ceiling_curves = role_results["ceiling"].final_curves(spec.total_steps, spec.metric)
    memory_curves = {
        kind: role_results[kind].final_curves(spec.total_steps, spec.metric)
        for kind in spec.memory_agents
    }
    gap = improvability_gap(floor_curves, ceiling_curves, memory_curves)
    report = ProtocolReport(spec=spec, roles=role_results, gap=gap)

    if out_dir is not None:
        with open(os.path.join(out_dir, "gap_report.txt"), "w") as f:
            f.write(report.to_text())
        with open(os.path.join(out_dir, "summary.csv"), "w") as f:
            f.write(report.summary_csv())
    return report


def _run_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_execute_run(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_run, tasks))
