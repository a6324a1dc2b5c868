/**
 * Counter-based random streams, matching the native library bit for bit.
 *
 * A stream is addressed by (seed, streamId, counter); draw i of a stream is
 * a pure function of the address, so replaying a stream never depends on
 * how many other streams exist or which process owns them.
 */

const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const STREAM_SALT = 0x5851f42d4c957f2dn;

/** First stream id used by scripted trace policies (one stream per env). */
export const STREAM_TRACE_BASE = 1n << 32n;

/** SplitMix64 finalizer; bijective on 64-bit integers. */
export function mix64(z: bigint): bigint {
  z &= MASK64;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return z ^ (z >> 31n);
}

/** Deterministic 64-bit stream of draws addressed by (seed, streamId). */
export class RngStream {
  private readonly key: bigint;
  private counter: bigint;

  constructor(seed: bigint | number, streamId: bigint | number = 0n) {
    const s = BigInt(seed) & MASK64;
    const id = BigInt(streamId) & MASK64;
    this.key = mix64(mix64(s + GOLDEN) ^ mix64(id ^ STREAM_SALT));
    this.counter = 0n;
  }

  /** Next raw 64-bit draw. */
  nextU64(): bigint {
    this.counter = (this.counter + 1n) & MASK64;
    return mix64((this.key + this.counter * GOLDEN) & MASK64);
  }

  /** Float64 in [0, 1): top 53 bits of the next draw. */
  uniform(): number {
    return Number(this.nextU64() >> 11n) * 2 ** -53;
  }
}
