/**
 * Line-oriented label format shared with the main package:
 * `category cx cy cz dx dy dz yaw score source`, score `-` when absent.
 */

import { Box, makeBox } from "./geometry.js";

export type LabelSource = "groundtruth" | "pseudo" | "pasted_gt" | "pasted_pseudo";

const SOURCES: ReadonlySet<string> = new Set([
  "groundtruth", "pseudo", "pasted_gt", "pasted_pseudo",
]);

export interface Label {
  category: string;
  box: Box;
  score: number | null;
  source: LabelSource;
}

function parseFloatStrict(token: string, where: string): number {
  const v = Number(token);
  if (!Number.isFinite(v) || token.trim() === "") {
    throw new Error(`${where}: bad number ${JSON.stringify(token)}`);
  }
  return v;
}

export function parseLabels(text: string): Label[] {
  const labels: Label[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    const fields = line.split(/\s+/);
    if (fields.length !== 10) {
      throw new Error(`line ${i + 1}: expected 10 fields, got ${fields.length}`);
    }
    const where = `line ${i + 1}`;
    const nums = fields.slice(1, 8).map((t) => parseFloatStrict(t, where));
    let score: number | null = null;
    if (fields[8] !== "-") {
      score = parseFloatStrict(fields[8], where);
      if (score < 0 || score > 1) {
        throw new Error(`${where}: score out of range: ${score}`);
      }
    }
    if (!SOURCES.has(fields[9])) {
      throw new Error(`${where}: unknown source ${JSON.stringify(fields[9])}`);
    }
    labels.push({
      category: fields[0],
      box: makeBox(nums[0], nums[1], nums[2], nums[3], nums[4], nums[5], nums[6]),
      score,
      source: fields[9] as LabelSource,
    });
  }
  return labels;
}
