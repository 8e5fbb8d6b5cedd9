export { canonicalJson, writeBundle } from "./bundle.js";
export type { BundleLayer, BundleTensor } from "./bundle.js";
export {
    CheckpointFormatError,
    ExportError,
    ManifestError,
    NonFiniteWeightError,
    UnmappedParameterError,
    UnsupportedRankError,
} from "./errors.js";
export { exportCheckpoint, readManifest } from "./export.js";
export type { ExportManifest, ExportSummary, MappingRule } from "./export.js";
export { bfloatToFloat, halfToFloat, readSafetensors } from "./safetensors.js";
export type { Checkpoint, CheckpointTensor } from "./safetensors.js";
