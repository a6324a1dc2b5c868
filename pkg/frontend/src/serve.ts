/**
 * Low-level client for the JSON-lines environment server.
 *
 * Spawns `python3 -m memgap.cli serve` and exchanges one JSON object per
 * line: requests on the child's stdin, responses in request order on its
 * stdout. Responses carry `ok: true` plus the payload, or `ok: false` with
 * an `error` string, which this client raises as a ServeError.
 */

import { type ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

export class ServeError extends Error {}

export interface ServeClientOptions {
  /** Python interpreter to run the server with (default: "python3"). */
  pythonBin?: string;
  /** Extra argv inserted before "serve" (default: ["-m", "memgap.cli"]). */
  module?: string[];
}

interface Pending {
  resolve: (value: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

export class ServeClient {
  private readonly child: ChildProcessWithoutNullStreams;
  private readonly lines: Interface;
  private readonly pending: Pending[] = [];
  private closed = false;

  constructor(options: ServeClientOptions = {}) {
    const bin = options.pythonBin ?? "python3";
    const module = options.module ?? ["-m", "memgap.cli"];
    this.child = spawn(bin, [...module, "serve"], {
      stdio: ["pipe", "pipe", "pipe"],
    });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.child.on("exit", () => this.failAll(new ServeError("server exited")));
    this.child.on("error", (err) => this.failAll(new ServeError(String(err))));
  }

  private onLine(line: string): void {
    const next = this.pending.shift();
    if (next === undefined) {
      return; // nothing awaits; stray output is ignored
    }
    let payload: Record<string, unknown>;
    try {
      payload = JSON.parse(line) as Record<string, unknown>;
    } catch (err) {
      next.reject(new ServeError(`unparseable response: ${line}`));
      return;
    }
    if (payload.ok === true) {
      next.resolve(payload);
    } else {
      next.reject(new ServeError(String(payload.error ?? "unknown error")));
    }
  }

  private failAll(err: Error): void {
    if (this.closed) {
      return;
    }
    this.closed = true;
    while (this.pending.length > 0) {
      this.pending.shift()?.reject(err);
    }
  }

  /** Send one request object; resolves with the matching response. */
  request(body: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.closed) {
      return Promise.reject(new ServeError("client is closed"));
    }
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.child.stdin.write(`${JSON.stringify(body)}\n`);
    });
  }

  /** End the session: close the server's stdin and wait for it to exit. */
  async close(): Promise<void> {
    if (this.closed) {
      return;
    }
    this.closed = true;
    const exited = new Promise<void>((resolve) => {
      this.child.once("exit", () => resolve());
    });
    this.child.stdin.end();
    await exited;
  }
}
