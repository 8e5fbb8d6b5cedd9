export class ExportError extends Error {
    constructor(message: string) {
        super(message);
        this.name = new.target.name;
    }
}

/** A weight tensor lacks a mapping rule, or a rule names a missing tensor. */
export class UnmappedParameterError extends ExportError {}

/** A mapped tensor is not 2-D or 4-D. */
export class UnsupportedRankError extends ExportError {}

/** A tensor holds NaN or infinity after the float32 cast. */
export class NonFiniteWeightError extends ExportError {}

/** The checkpoint file is truncated, misdeclared, or of an unknown dtype. */
export class CheckpointFormatError extends ExportError {}

/** The manifest is malformed or inconsistent with the checkpoint. */
export class ManifestError extends ExportError {}
