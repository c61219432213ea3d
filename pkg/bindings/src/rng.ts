/**
 * Deterministic random streams, bit-compatible with the Python package
 * (src/semisample/rng.py): FNV-1a keyed splitmix64. Keep every expression
 * in lockstep with the Python source; the test suite pins golden values.
 */

const MASK64 = (1n << 64n) - 1n;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;

const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

const INV_2_53 = 1.0 / 2 ** 53;

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const b of data) {
    h = ((h ^ BigInt(b)) * FNV_PRIME) & MASK64;
  }
  return h;
}

export function streamKey(...parts: Array<string | number>): string {
  return parts.map((p) => String(p)).join("|");
}

export class DetRng {
  private state: bigint;

  constructor(state: bigint) {
    this.state = state & MASK64;
  }

  static fromKey(...parts: Array<string | number>): DetRng {
    const bytes = new TextEncoder().encode(streamKey(...parts));
    return new DetRng(fnv1a64(bytes));
  }

  nextU64(): bigint {
    this.state = (this.state + GOLDEN) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * MIX1) & MASK64;
    z = ((z ^ (z >> 27n)) * MIX2) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Uniform float in [0, 1). */
  random(): number {
    return Number(this.nextU64() >> 11n) * INV_2_53;
  }

  /** Uniform integer in [0, n). */
  randbelow(n: number): number {
    if (n <= 0) {
      throw new RangeError(`randbelow requires n > 0, got ${n}`);
    }
    const v = Math.floor(this.random() * n);
    return v >= n ? n - 1 : v;
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle<T>(seq: T[]): void {
    for (let i = seq.length - 1; i > 0; i--) {
      const j = this.randbelow(i + 1);
      const tmp = seq[i];
      seq[i] = seq[j];
      seq[j] = tmp;
    }
  }

  /** min(k, n) distinct indices from [0, n), drawn without replacement. */
  sampleIndices(n: number, k: number): number[] {
    if (k < 0) {
      throw new RangeError(`sample size must be >= 0, got ${k}`);
    }
    const idx = Array.from({ length: n }, (_, i) => i);
    const m = Math.min(k, n);
    for (let i = 0; i < m; i++) {
      const j = i + this.randbelow(n - i);
      const tmp = idx[i];
      idx[i] = idx[j];
      idx[j] = tmp;
    }
    return idx.slice(0, m);
  }
}
