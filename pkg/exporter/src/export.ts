import { readFileSync } from "node:fs";
import { basename } from "node:path";

import { BundleLayer, BundleTensor, writeBundle } from "./bundle.js";
import {
    ManifestError,
    NonFiniteWeightError,
    UnmappedParameterError,
    UnsupportedRankError,
} from "./errors.js";
import { Checkpoint, readSafetensors } from "./safetensors.js";

export interface MappingRule {
    layer_index: number;
    kind: "conv" | "fc";
    m: number;
    n: number;
    k: number;
}

export interface ExportManifest {
    checkpoint?: string;
    output?: string;
    model_name?: string;
    /** Framework parameter name -> layer placement. Total over weights. */
    mapping: Record<string, MappingRule>;
}

export interface ExportSummary {
    out: string;
    modelName: string;
    layers: number;
    weights: number;
    /** 1-D tensors (biases and the like) left out of the bundle. */
    skipped: string[];
}

function isPositiveInt(value: unknown): value is number {
    return typeof value === "number" && Number.isInteger(value) && value > 0;
}

function checkRule(name: string, rule: MappingRule): void {
    if (rule === null || typeof rule !== "object") {
        throw new ManifestError(`mapping for ${name} must be an object`);
    }
    if (rule.kind !== "conv" && rule.kind !== "fc") {
        throw new ManifestError(
            `mapping for ${name}: kind must be "conv" or "fc", got ${JSON.stringify(rule.kind)}`,
        );
    }
    if (
        typeof rule.layer_index !== "number" ||
        !Number.isInteger(rule.layer_index) ||
        rule.layer_index < 0
    ) {
        throw new ManifestError(
            `mapping for ${name}: layer_index must be a non-negative integer`,
        );
    }
    if (!isPositiveInt(rule.m) || !isPositiveInt(rule.n) || !isPositiveInt(rule.k)) {
        throw new ManifestError(
            `mapping for ${name}: m, n, k must be positive integers`,
        );
    }
    if (rule.kind === "fc" && rule.k !== 1) {
        throw new ManifestError(`mapping for ${name}: fc layers require k = 1`);
    }
}

export function readManifest(path: string): ExportManifest {
    let parsed: unknown;
    try {
        parsed = JSON.parse(readFileSync(path, "utf-8"));
    } catch (cause) {
        throw new ManifestError(`cannot read manifest ${path}: ${cause}`);
    }
    if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
        throw new ManifestError("manifest must be a JSON object");
    }
    const manifest = parsed as ExportManifest;
    if (
        manifest.mapping === null ||
        typeof manifest.mapping !== "object" ||
        Array.isArray(manifest.mapping)
    ) {
        throw new ManifestError('manifest needs a "mapping" object');
    }
    for (const [name, rule] of Object.entries(manifest.mapping)) {
        checkRule(name, rule);
    }
    const indices = Object.values(manifest.mapping).map((r) => r.layer_index);
    if (new Set(indices).size !== indices.length) {
        throw new ManifestError("mapping reuses a layer_index");
    }
    for (let i = 0; i < indices.length; i++) {
        if (!indices.includes(i)) {
            throw new ManifestError(
                `layer indices must cover 0..${indices.length - 1}, missing ${i}`,
            );
        }
    }
    return manifest;
}

function expectedShape(rule: MappingRule): number[] {
    return rule.kind === "conv" ? [rule.m, rule.n, rule.k, rule.k] : [rule.m, rule.n];
}

function sameShape(a: number[], b: number[]): boolean {
    return a.length === b.length && a.every((dim, i) => dim === b[i]);
}

function tensorName(rule: MappingRule): string {
    return `layer${String(rule.layer_index).padStart(3, "0")}_${rule.kind}`;
}

/**
 * Convert a checkpoint into a .ptqb bundle per the manifest's mapping.
 *
 * Every 2-D/4-D float tensor must have a mapping rule and every rule a
 * tensor; 1-D tensors are skipped with a warning. Weight values are
 * bit-exact after the float32 cast.
 */
export function exportCheckpoint(
    manifest: ExportManifest,
    options: { checkpoint?: string; out?: string } = {},
): ExportSummary {
    const checkpointPath = options.checkpoint ?? manifest.checkpoint;
    if (!checkpointPath) {
        throw new ManifestError(
            "no checkpoint path (give --checkpoint or set it in the manifest)",
        );
    }
    const outPath = options.out ?? manifest.output;
    if (!outPath) {
        throw new ManifestError(
            "no output path (give --out or set it in the manifest)",
        );
    }

    const checkpoint: Checkpoint = readSafetensors(checkpointPath);
    if (checkpoint.size === 0) {
        throw new UnmappedParameterError("checkpoint contains no tensors");
    }

    const skipped: string[] = [];
    const layers: BundleLayer[] = [];
    const tensors: BundleTensor[] = [];
    let weights = 0;
    for (const [name, tensor] of checkpoint) {
        const rule = manifest.mapping[name];
        if (tensor.shape.length === 1 && rule === undefined) {
            console.warn(`skipping 1-D tensor ${name} (biases are not quantized)`);
            skipped.push(name);
            continue;
        }
        if (rule === undefined) {
            throw new UnmappedParameterError(
                `checkpoint tensor ${name} has no mapping rule`,
            );
        }
        if (tensor.shape.length !== 2 && tensor.shape.length !== 4) {
            throw new UnsupportedRankError(
                `tensor ${name} is ${tensor.shape.length}-D, only 2-D and 4-D export`,
            );
        }
        const expected = expectedShape(rule);
        if (!sameShape(tensor.shape, expected)) {
            throw new ManifestError(
                `tensor ${name}: mapping expects shape [${expected}], ` +
                    `checkpoint has [${tensor.shape}]`,
            );
        }
        for (let i = 0; i < tensor.data.length; i++) {
            if (!Number.isFinite(tensor.data[i])) {
                throw new NonFiniteWeightError(
                    `tensor ${name} holds a non-finite weight at flat index ${i}`,
                );
            }
        }
        layers.push({
            layerIndex: rule.layer_index,
            kind: rule.kind,
            m: rule.m,
            n: rule.n,
            k: rule.k,
            tensorName: tensorName(rule),
        });
        tensors.push({
            name: tensorName(rule),
            shape: tensor.shape,
            data: tensor.data,
        });
        weights += tensor.data.length;
    }

    for (const name of Object.keys(manifest.mapping)) {
        if (!checkpoint.has(name)) {
            throw new UnmappedParameterError(
                `mapping names ${name}, which the checkpoint does not contain`,
            );
        }
    }

    const modelName =
        manifest.model_name ?? basename(checkpointPath).replace(/\.[^.]*$/, "");
    writeBundle(outPath, modelName, layers, tensors);
    return { out: outPath, modelName, layers: layers.length, weights, skipped };
}
