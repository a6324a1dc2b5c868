export { mix64, RngStream, STREAM_TRACE_BASE } from "./rng.js";
export { ServeClient, ServeError, type ServeClientOptions } from "./serve.js";
export {
  EnvBatchClient,
  obsDims,
  type BatchInfo,
  type MakeOptions,
  type ObservabilityLevel,
  type ResetResult,
  type StepResult,
} from "./env.js";
export { formatBits, scriptedTraceLines, type TraceOptions } from "./trace.js";
