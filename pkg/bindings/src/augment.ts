/**
 * Frame augmentation, bit-compatible with the main package's augmentor
 * (src/semisample/augmentor.py). Draw order, rng consumption, collision
 * decisions, and output assembly mirror the Python implementation exactly;
 * given the same database directory, frame bytes, config, epoch, and seed,
 * the output point buffer is byte-identical to the CLI's.
 */

import {
  BevParams,
  Box,
  bevParams,
  collides,
  pointInBox,
} from "./geometry.js";
import { DatabaseHandle, SampleRecord, samplePoints } from "./database.js";
import { Label, LabelSource } from "./labels.js";
import { DetRng } from "./rng.js";

export interface AugmentationConfig {
  samples_per_category: Record<string, number>;
  tau_pseudo_sample?: Record<string, number>;
  tau_unlabeled_frame?: number;
  gt_on_labeled?: boolean;
  pseudo_on_labeled?: boolean;
  gt_on_unlabeled?: boolean;
  pseudo_on_unlabeled?: boolean;
  collision_mode?: "bev" | "full3d";
  category_shuffle?: boolean;
  fade_epoch?: number | null;
  remove_occluded_points?: boolean;
  seed?: number;
}

export interface PlacedSample {
  label: Label;
  sourceFrame: string;
  numPoints: number;
}

export interface InsertionReport {
  attempted: Record<string, number>;
  accepted: Record<string, number>;
  placed: PlacedSample[];
}

export interface AugmentResult {
  points: Float32Array;
  channelCount: number;
  supervisingLabels: Label[];
  collisionAnchors: Label[];
  report: InsertionReport;
}

export interface FrameInput {
  /** Row-major packed points, manifest channel count. */
  points: Float32Array;
  channelCount: number;
  frameId: string;
  epoch: number;
  seed: number;
  config: AugmentationConfig;
  gtDb?: DatabaseHandle;
  pseudoDb?: DatabaseHandle;
}

export function fadeActive(epoch: number, cfg: AugmentationConfig): boolean {
  if (epoch < 0) {
    throw new RangeError(`epoch must be >= 0, got ${epoch}`);
  }
  return cfg.fade_epoch !== null && cfg.fade_epoch !== undefined && epoch >= cfg.fade_epoch;
}

interface View {
  db: DatabaseHandle;
  indicesByCategory: Map<string, number[]>;
}

function fullView(db: DatabaseHandle): View {
  return { db, indicesByCategory: db.byCategory };
}

function filterByScore(db: DatabaseHandle, thresholds: Record<string, number>): View {
  const out = new Map<string, number[]>();
  for (const [category, indices] of db.byCategory) {
    if (indices.length > 0 && !(category in thresholds)) {
      throw new Error(`no score threshold supplied for category ${JSON.stringify(category)}`);
    }
    const tau = thresholds[category] ?? 0.0;
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw new RangeError(`threshold for ${category} must be in [0, 1], got ${tau}`);
    }
    out.set(category, indices.filter((i) => db.records[i].score > tau));
  }
  return { db, indicesByCategory: out };
}

function drawSamples(view: View, category: string, k: number, rng: DetRng): number[] {
  if (k < 0) {
    throw new RangeError(`draw count must be >= 0, got ${k}`);
  }
  const pool = view.indicesByCategory.get(category);
  if (pool === undefined) {
    throw new Error(`unknown category ${JSON.stringify(category)}`);
  }
  if (k === 0 || pool.length === 0) {
    return [];
  }
  return rng.sampleIndices(pool.length, k).map((i) => pool[i]);
}

function shuffleCategories(categories: string[], rng: DetRng, shuffle: boolean): string[] {
  const queue = [...categories];
  if (queue.length === 0) {
    throw new Error("category queue must be non-empty");
  }
  if (shuffle) {
    rng.shuffle(queue);
  }
  return queue;
}

interface Candidate {
  recordIndex: number;
  record: SampleRecord;
  db: DatabaseHandle;
  source: LabelSource;
}

function planIndices(
  occupied: Box[],
  candidateBoxes: Box[],
  full3d: boolean,
): number[] {
  const working: BevParams[] = occupied.map(bevParams);
  const accepted: number[] = [];
  for (let i = 0; i < candidateBoxes.length; i++) {
    const p = bevParams(candidateBoxes[i]);
    if (working.some((other) => collides(p, other, full3d))) {
      continue;
    }
    accepted.push(i);
    working.push(p);
  }
  return accepted;
}

function emptyReport(cfg: AugmentationConfig): InsertionReport {
  const attempted: Record<string, number> = {};
  const accepted: Record<string, number> = {};
  for (const c of Object.keys(cfg.samples_per_category)) {
    attempted[c] = 0;
    accepted[c] = 0;
  }
  return { attempted, accepted, placed: [] };
}

function applyInsertions(
  points: Float32Array,
  channelCount: number,
  accepted: Candidate[],
  removeOccluded: boolean,
): Float32Array {
  if (accepted.length === 0) {
    return points;
  }
  for (const cand of accepted) {
    if (cand.db.channelCount !== channelCount) {
      throw new Error(
        `sample from ${cand.record.sourceFrame} has ${cand.db.channelCount} channels, ` +
        `frame has ${channelCount}`,
      );
    }
  }
  const n = points.length / channelCount;
  let keep: Uint8Array | null = null;
  let nKept = n;
  if (removeOccluded) {
    keep = new Uint8Array(n).fill(1);
    const boxes = accepted.map((c) => c.record.box);
    const cos = boxes.map((b) => Math.cos(b.yaw));
    const sin = boxes.map((b) => Math.sin(b.yaw));
    nKept = 0;
    for (let i = 0; i < n; i++) {
      const px = points[i * channelCount];
      const py = points[i * channelCount + 1];
      const pz = points[i * channelCount + 2];
      for (let j = 0; j < boxes.length; j++) {
        if (pointInBox(px, py, pz, boxes[j], cos[j], sin[j])) {
          keep[i] = 0;
          break;
        }
      }
      nKept += keep[i];
    }
  }
  const extra = accepted.reduce((acc, c) => acc + c.record.numPoints, 0);
  const out = new Float32Array((nKept + extra) * channelCount);
  let pos = 0;
  if (keep === null) {
    out.set(points, 0);
    pos = points.length;
  } else {
    for (let i = 0; i < n; i++) {
      if (keep[i]) {
        out.set(points.subarray(i * channelCount, (i + 1) * channelCount), pos);
        pos += channelCount;
      }
    }
  }
  for (const cand of accepted) {
    const slice = samplePoints(cand.db, cand.recordIndex);
    out.set(slice, pos);
    pos += slice.length;
  }
  return out;
}

function pastedLabel(record: SampleRecord, source: LabelSource): Label {
  return { category: record.category, box: record.box, score: record.score, source };
}

function runAugment(
  input: FrameInput,
  anchors: Box[],
  useGt: boolean,
  usePseudo: boolean,
  rng: DetRng,
): { points: Float32Array; report: InsertionReport } {
  const cfg = input.config;
  const report = emptyReport(cfg);
  const categories = Object.keys(cfg.samples_per_category);
  if ((!useGt && !usePseudo) || categories.length === 0) {
    return { points: input.points, report };
  }
  let gtView: View | null = null;
  let pseudoView: View | null = null;
  if (useGt) {
    if (!input.gtDb) {
      throw new Error("gt database required by the enabled gt-sampling strategy");
    }
    gtView = fullView(input.gtDb);
  }
  if (usePseudo) {
    if (!input.pseudoDb) {
      throw new Error("pseudo database required by the enabled pseudo-sampling strategy");
    }
    pseudoView = filterByScore(input.pseudoDb, cfg.tau_pseudo_sample ?? {});
  }
  const queue = shuffleCategories(categories, rng, cfg.category_shuffle ?? true);
  const candidates: Candidate[] = [];
  for (const cat of queue) {
    const k = cfg.samples_per_category[cat];
    if (gtView) {
      for (const idx of drawSamples(gtView, cat, k, rng)) {
        candidates.push({
          recordIndex: idx, record: gtView.db.records[idx],
          db: gtView.db, source: "pasted_gt",
        });
        report.attempted[cat] += 1;
      }
    }
    if (pseudoView) {
      for (const idx of drawSamples(pseudoView, cat, k, rng)) {
        candidates.push({
          recordIndex: idx, record: pseudoView.db.records[idx],
          db: pseudoView.db, source: "pasted_pseudo",
        });
        report.attempted[cat] += 1;
      }
    }
  }
  const full3d = (cfg.collision_mode ?? "bev") === "full3d";
  const acceptedIdx = planIndices(anchors, candidates.map((c) => c.record.box), full3d);
  const accepted = acceptedIdx.map((i) => candidates[i]);
  const points = applyInsertions(
    input.points, input.channelCount, accepted, cfg.remove_occluded_points ?? true,
  );
  for (const cand of accepted) {
    report.accepted[cand.record.category] += 1;
    report.placed.push({
      label: pastedLabel(cand.record, cand.source),
      sourceFrame: cand.record.sourceFrame,
      numPoints: cand.record.numPoints,
    });
  }
  return { points, report };
}

/** Paste samples into a labeled frame against its groundtruth boxes. */
export function augmentLabeledFrame(input: FrameInput, labels: Label[]): AugmentResult {
  for (const lb of labels) {
    if (lb.source !== "groundtruth") {
      throw new Error(
        `frame ${input.frameId} carries a ${lb.source} label; ` +
        "labeled-frame augmentation expects groundtruth labels only",
      );
    }
  }
  const cfg = input.config;
  if (fadeActive(input.epoch, cfg)) {
    return {
      points: input.points,
      channelCount: input.channelCount,
      supervisingLabels: [...labels],
      collisionAnchors: [],
      report: emptyReport(cfg),
    };
  }
  const rng = DetRng.fromKey(cfg.seed ?? 0, input.frameId, input.epoch);
  const { points, report } = runAugment(
    input, labels.map((lb) => lb.box),
    cfg.gt_on_labeled ?? true, cfg.pseudo_on_labeled ?? false, rng,
  );
  return {
    points,
    channelCount: input.channelCount,
    supervisingLabels: [...labels, ...report.placed.map((p) => p.label)],
    collisionAnchors: [],
    report,
  };
}

/** Paste samples into an unlabeled frame against thresholded pseudo labels. */
export function augmentUnlabeledFrame(input: FrameInput, pseudoLabels: Label[]): AugmentResult {
  for (const lb of pseudoLabels) {
    if (lb.score === null) {
      throw new Error(`frame ${input.frameId}: pseudo label without a score`);
    }
  }
  const cfg = input.config;
  const tau = cfg.tau_unlabeled_frame ?? 0.5;
  const anchors = pseudoLabels.filter((lb) => (lb.score as number) > tau);
  if (fadeActive(input.epoch, cfg)) {
    return {
      points: input.points,
      channelCount: input.channelCount,
      supervisingLabels: [],
      collisionAnchors: anchors,
      report: emptyReport(cfg),
    };
  }
  const rng = DetRng.fromKey(cfg.seed ?? 0, input.frameId, input.epoch);
  const { points, report } = runAugment(
    input, anchors.map((lb) => lb.box),
    cfg.gt_on_unlabeled ?? false, cfg.pseudo_on_unlabeled ?? false, rng,
  );
  return {
    points,
    channelCount: input.channelCount,
    supervisingLabels: [],
    collisionAnchors: anchors,
    report,
  };
}
