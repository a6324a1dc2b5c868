/**
 * Typed environment-batch client over the JSON-lines server.
 *
 * Mirrors the native batched engine: N independent instances stepped in
 * lockstep, finished episodes auto-reset, `finalObs` preserving the
 * pre-reset observation of episodes that ended this step.
 */

import { ServeClient } from "./serve.js";

export type ObservabilityLevel = "partial" | "perfect_memory" | "full_state";

export interface MakeOptions {
  env: string;
  level?: ObservabilityLevel;
  numEnvs?: number;
  seed?: number;
}

export interface BatchInfo {
  handle: number;
  obsDim: number;
  actionDim: number;
  numEnvs: number;
  gamma: number;
}

export interface ResetResult {
  /** Row per env instance. */
  obs: number[][];
  /** Row per env instance; true marks a legal action. */
  mask: boolean[][];
}

export interface StepResult {
  obs: number[][];
  reward: number[];
  terminated: boolean[];
  truncated: boolean[];
  mask: boolean[][];
  /** For instances that finished this step, the episode's last observation;
   *  `obs` already holds the observation of the auto-reset episode. */
  finalObs: number[][];
}

function toBoolRows(rows: number[][]): boolean[][] {
  return rows.map((row) => row.map((v) => v !== 0));
}

export class EnvBatchClient {
  private constructor(
    private readonly client: ServeClient,
    readonly info: BatchInfo,
  ) {}

  /** Create a batch on the given server. */
  static async make(client: ServeClient, options: MakeOptions): Promise<EnvBatchClient> {
    const response = await client.request({
      op: "make",
      env: options.env,
      level: options.level ?? "partial",
      num_envs: options.numEnvs ?? 1,
      seed: options.seed ?? 0,
    });
    return new EnvBatchClient(client, {
      handle: response.handle as number,
      obsDim: response.obs_dim as number,
      actionDim: response.action_dim as number,
      numEnvs: response.num_envs as number,
      gamma: response.gamma as number,
    });
  }

  async reset(): Promise<ResetResult> {
    const response = await this.client.request({ op: "reset", handle: this.info.handle });
    return {
      obs: response.obs as number[][],
      mask: toBoolRows(response.mask as number[][]),
    };
  }

  async step(actions: number[]): Promise<StepResult> {
    const response = await this.client.request({
      op: "step",
      handle: this.info.handle,
      actions,
    });
    return {
      obs: response.obs as number[][],
      reward: response.reward as number[],
      terminated: (response.terminated as number[]).map((v) => v !== 0),
      truncated: (response.truncated as number[]).map((v) => v !== 0),
      mask: toBoolRows(response.mask as number[][]),
      finalObs: response.final_obs as number[][],
    };
  }

  async close(): Promise<void> {
    await this.client.request({ op: "close", handle: this.info.handle });
  }
}

/** Observation widths per observability level, plus the action count. */
export async function obsDims(
  client: ServeClient,
  env: string,
): Promise<{ obsDims: Record<string, number>; actionDim: number }> {
  const response = await client.request({ op: "obs_dims", env });
  return {
    obsDims: response.obs_dims as Record<string, number>,
    actionDim: response.action_dim as number,
  };
}
