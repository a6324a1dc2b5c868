/**
 * Scripted reference trajectories.
 *
 * Replays the same uniform-random-legal-action policy the native CLI's
 * `trace` command scripts — one random stream per env instance — and
 * renders each step in the identical text format, so the two outputs can
 * be compared byte for byte.
 */

import { EnvBatchClient, type ObservabilityLevel } from "./env.js";
import { RngStream, STREAM_TRACE_BASE } from "./rng.js";
import { ServeClient } from "./serve.js";

export interface TraceOptions {
  env: string;
  level?: ObservabilityLevel;
  numEnvs?: number;
  steps?: number;
  seed?: number;
}

/** Vector rendering: a bit string when every entry rounds to 0/1, else
 *  comma-separated six-decimal values. */
export function formatBits(vec: number[]): string {
  let maxDiff = 0;
  let lo = Infinity;
  let hi = -Infinity;
  const rounded = vec.map((v) => {
    // round half to even, matching numpy's rint
    const r = Math.round(v);
    const result =
      Math.abs(v % 1) === 0.5 && r % 2 !== 0 ? r - Math.sign(v) : r;
    maxDiff = Math.max(maxDiff, Math.abs(v - result));
    lo = Math.min(lo, result);
    hi = Math.max(hi, result);
    return result;
  });
  if (maxDiff <= 1e-12 && lo >= 0 && hi <= 1) {
    return rounded.map((b) => (b ? "1" : "0")).join("");
  }
  return vec.map((v) => v.toFixed(6)).join(",");
}

/** Run the scripted policy and return one formatted line per (step, env). */
export async function scriptedTraceLines(
  client: ServeClient,
  options: TraceOptions,
): Promise<string[]> {
  const numEnvs = options.numEnvs ?? 1;
  const steps = options.steps ?? 100;
  const seed = options.seed ?? 0;
  const batch = await EnvBatchClient.make(client, {
    env: options.env,
    level: options.level ?? "partial",
    numEnvs,
    seed,
  });
  const policy = Array.from(
    { length: numEnvs },
    (_, i) => new RngStream(BigInt(seed), STREAM_TRACE_BASE + BigInt(i)),
  );
  let { mask } = await batch.reset();
  const lines: string[] = [];
  for (let t = 0; t < steps; t++) {
    const actions = mask.map((row, i) => {
      const legal: number[] = [];
      row.forEach((ok, a) => {
        if (ok) {
          legal.push(a);
        }
      });
      return legal[Number(policy[i].nextU64() % BigInt(legal.length))];
    });
    const step = await batch.step(actions);
    for (let i = 0; i < numEnvs; i++) {
      lines.push(
        `step=${t} env=${i} action=${actions[i]} ` +
          `reward=${step.reward[i].toFixed(6)} ` +
          `terminated=${step.terminated[i] ? 1 : 0} ` +
          `truncated=${step.truncated[i] ? 1 : 0} ` +
          `obs=${formatBits(step.obs[i])} ` +
          `mask=${formatBits(step.mask[i].map((b) => (b ? 1 : 0)))}`,
      );
    }
    mask = step.mask;
  }
  await batch.close();
  return lines;
}
