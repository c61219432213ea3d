/**
 * Script-facing surface: load a sample database, augment labeled and
 * unlabeled frames in-process, and read database statistics. Handles are
 * immutable and shareable across workers; callers supply seeds, so
 * parallel data loaders stay deterministic.
 */

export { loadDatabase, databaseStats } from "./database.js";
export type { DatabaseHandle, DatabaseStats, SampleRecord } from "./database.js";
export { augmentLabeledFrame, augmentUnlabeledFrame, fadeActive } from "./augment.js";
export type {
  AugmentationConfig,
  AugmentResult,
  FrameInput,
  InsertionReport,
  PlacedSample,
} from "./augment.js";
export { parseLabels } from "./labels.js";
export type { Label, LabelSource } from "./labels.js";
export type { Box } from "./geometry.js";
export { DetRng } from "./rng.js";
