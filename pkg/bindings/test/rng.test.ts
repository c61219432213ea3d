import { describe, expect, it } from "vitest";

import { DetRng, fnv1a64, streamKey } from "../src/rng.js";

describe("DetRng", () => {
  it("reproduces the reference stream values", () => {
    // golden values pinned in the main package's test suite
    expect(fnv1a64(new Uint8Array())).toBe(0xcbf29ce484222325n);
    expect(fnv1a64(new TextEncoder().encode("123|frame_0007|2"))).toBe(0xb5d3ab1b5e0a09f0n);
    expect(streamKey(123, "frame_0007", 2)).toBe("123|frame_0007|2");
    const r = DetRng.fromKey(123, "frame_0007", 2);
    expect([r.nextU64(), r.nextU64(), r.nextU64()]).toEqual([
      421431671288358323n,
      14649181281855182611n,
      7717772226521088345n,
    ]);
    expect(DetRng.fromKey(0).random()).toBe(0.18737401942865495);
  });

  it("derives distinct streams per key", () => {
    const a = DetRng.fromKey(7, "frame", 3);
    const b = DetRng.fromKey(7, "frame", 4);
    expect(a.nextU64()).not.toBe(b.nextU64());
  });

  it("keeps random() in [0, 1)", () => {
    const r = DetRng.fromKey(42);
    for (let i = 0; i < 5000; i++) {
      const x = r.random();
      expect(x).toBeGreaterThanOrEqual(0);
      expect(x).toBeLessThan(1);
    }
  });

  it("draws distinct bounded sample indices", () => {
    const r = DetRng.fromKey(1);
    for (const [n, k] of [[10, 3], [5, 10], [0, 4], [7, 0]] as const) {
      const picks = r.sampleIndices(n, k);
      expect(picks.length).toBe(Math.min(n, k));
      expect(new Set(picks).size).toBe(picks.length);
      for (const p of picks) {
        expect(p).toBeGreaterThanOrEqual(0);
        expect(p).toBeLessThan(n);
      }
    }
  });

  it("shuffle preserves the multiset", () => {
    const r = DetRng.fromKey(9);
    const items = [1, 2, 3, 4, 5, 6, 7];
    const shuffled = [...items];
    r.shuffle(shuffled);
    expect([...shuffled].sort()).toEqual([...items].sort());
  });
});
