/**
 * Read-only access to sample database directories (index.txt + points.bin
 * + meta), the same layout the CLI writes and loads.
 */

import { readFileSync, statSync } from "node:fs";
import { join } from "node:path";

import { Box, makeBox } from "./geometry.js";

export interface SampleRecord {
  category: string;
  box: Box;
  score: number;
  sourceFrame: string;
  numPoints: number;
  offset: number;
}

export interface DatabaseHandle {
  kind: "gt" | "pseudo";
  channelCount: number;
  records: SampleRecord[];
  byCategory: Map<string, number[]>;
  /** Packed float32 point store; row-major channelCount columns. */
  store: Float32Array;
}

export interface DatabaseStats {
  kind: string;
  channelCount: number;
  total: number;
  perCategory: Record<string, number>;
}

function parseMeta(text: string): Map<string, string> {
  const meta = new Map<string, string>();
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) {
      continue;
    }
    const sep = line.indexOf(":");
    if (sep < 0) {
      throw new Error(`bad meta line ${JSON.stringify(line)}`);
    }
    meta.set(line.slice(0, sep).trim(), line.slice(sep + 1).trim());
  }
  return meta;
}

function requireMeta(meta: Map<string, string>, key: string): string {
  const v = meta.get(key);
  if (v === undefined) {
    throw new Error(`meta field missing: ${key}`);
  }
  return v;
}

export function loadDatabase(path: string): DatabaseHandle {
  const meta = parseMeta(readFileSync(join(path, "meta"), "utf8"));
  const version = Number(requireMeta(meta, "format_version"));
  if (version !== 1) {
    throw new Error(`unsupported format_version ${version}`);
  }
  const kind = requireMeta(meta, "kind");
  if (kind !== "gt" && kind !== "pseudo") {
    throw new Error(`bad database kind ${JSON.stringify(kind)}`);
  }
  const channelCount = Number(requireMeta(meta, "channel_count"));
  const numSamples = Number(requireMeta(meta, "num_samples"));
  const categories = (meta.get("categories") ?? "").split(",").filter((c) => c);

  const rowBytes = 4 * channelCount;
  const records: SampleRecord[] = [];
  let expectedOffset = 0;
  const indexText = readFileSync(join(path, "index.txt"), "utf8");
  const lines = indexText.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    const f = line.split(/\s+/);
    if (f.length !== 12) {
      throw new Error(`index line ${i + 1}: expected 12 fields, got ${f.length}`);
    }
    const nums = f.slice(1, 9).map(Number);
    if (nums.some((v) => !Number.isFinite(v))) {
      throw new Error(`index line ${i + 1}: bad number`);
    }
    const numPoints = Number(f[10]);
    const offset = Number(f[11]);
    if (offset !== expectedOffset) {
      throw new Error(
        `index line ${i + 1}: offset ${offset} disagrees with point store position ${expectedOffset}`,
      );
    }
    records.push({
      category: f[0],
      box: makeBox(nums[0], nums[1], nums[2], nums[3], nums[4], nums[5], nums[6]),
      score: nums[7],
      sourceFrame: f[9],
      numPoints,
      offset,
    });
    expectedOffset += numPoints * rowBytes;
  }
  if (records.length !== numSamples) {
    throw new Error(`index has ${records.length} records but meta declares ${numSamples}`);
  }

  const pointsPath = join(path, "points.bin");
  const size = statSync(pointsPath).size;
  if (size !== expectedOffset) {
    throw new Error(`point store has ${size} bytes, index requires ${expectedOffset}`);
  }
  const buf = readFileSync(pointsPath);
  const aligned = buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
  const store = new Float32Array(aligned);

  const byCategory = new Map<string, number[]>();
  for (const c of categories) {
    byCategory.set(c, []);
  }
  records.forEach((rec, i) => {
    const bucket = byCategory.get(rec.category);
    if (bucket) {
      bucket.push(i);
    } else {
      byCategory.set(rec.category, [i]);
    }
  });

  return { kind, channelCount, records, byCategory, store };
}

/** Float32 view of one sample's rows inside the shared store (no copy). */
export function samplePoints(db: DatabaseHandle, recordIndex: number): Float32Array {
  const rec = db.records[recordIndex];
  const start = rec.offset / 4;
  return db.store.subarray(start, start + rec.numPoints * db.channelCount);
}

export function databaseStats(db: DatabaseHandle): DatabaseStats {
  const perCategory: Record<string, number> = {};
  for (const key of [...db.byCategory.keys()].sort()) {
    perCategory[key] = db.byCategory.get(key)!.length;
  }
  return {
    kind: db.kind,
    channelCount: db.channelCount,
    total: db.records.length,
    perCategory,
  };
}
