import { readFileSync } from "node:fs";

import { CheckpointFormatError } from "./errors.js";

export interface CheckpointTensor {
    dtype: string;
    shape: number[];
    /** Values after the cast to float32. */
    data: Float32Array;
}

export type Checkpoint = Map<string, CheckpointTensor>;

const DTYPE_BYTES: Record<string, number> = {
    F64: 8,
    F32: 4,
    F16: 2,
    BF16: 2,
};

interface HeaderEntry {
    dtype: string;
    shape: number[];
    data_offsets: [number, number];
}

/** Exact float32 value of an IEEE 754 half, including subnormals. */
export function halfToFloat(bits: number): number {
    const sign = bits & 0x8000 ? -1 : 1;
    const exponent = (bits >> 10) & 0x1f;
    const fraction = bits & 0x3ff;
    if (exponent === 0) {
        return sign * fraction * 2 ** -24;
    }
    if (exponent === 31) {
        return fraction ? NaN : sign * Infinity;
    }
    return sign * (1 + fraction / 1024) * 2 ** (exponent - 15);
}

const scratch = new DataView(new ArrayBuffer(4));

/** bfloat16 is the top half of a float32; shift and reinterpret. */
export function bfloatToFloat(bits: number): number {
    scratch.setUint32(0, bits << 16, true);
    return scratch.getFloat32(0, true);
}

function numel(shape: number[]): number {
    return shape.reduce((total, dim) => total * dim, 1);
}

function castToFloat32(dtype: string, raw: ArrayBuffer): Float32Array {
    switch (dtype) {
        case "F32":
            return new Float32Array(raw);
        case "F64":
            return new Float32Array(new Float64Array(raw));
        case "F16": {
            const halves = new Uint16Array(raw);
            const out = new Float32Array(halves.length);
            for (let i = 0; i < halves.length; i++) {
                out[i] = halfToFloat(halves[i]);
            }
            return out;
        }
        case "BF16": {
            const halves = new Uint16Array(raw);
            const out = new Float32Array(halves.length);
            for (let i = 0; i < halves.length; i++) {
                out[i] = bfloatToFloat(halves[i]);
            }
            return out;
        }
        default:
            throw new CheckpointFormatError(`unsupported dtype ${dtype}`);
    }
}

/**
 * Read a .safetensors checkpoint: u64 LE header length, JSON header
 * mapping tensor names to {dtype, shape, data_offsets}, then the packed
 * little-endian payload. All floats are cast to float32.
 */
export function readSafetensors(path: string): Checkpoint {
    const file = readFileSync(path);
    const bytes = file.buffer.slice(
        file.byteOffset,
        file.byteOffset + file.byteLength,
    );
    if (bytes.byteLength < 8) {
        throw new CheckpointFormatError(
            `checkpoint is ${bytes.byteLength} bytes, header length needs 8`,
        );
    }
    const headerLength = Number(new DataView(bytes).getBigUint64(0, true));
    if (8 + headerLength > bytes.byteLength) {
        throw new CheckpointFormatError(
            `header declares ${headerLength} bytes, file has ${bytes.byteLength - 8}`,
        );
    }
    let header: Record<string, HeaderEntry>;
    try {
        header = JSON.parse(
            new TextDecoder("utf-8", { fatal: true }).decode(
                bytes.slice(8, 8 + headerLength),
            ),
        );
    } catch (cause) {
        throw new CheckpointFormatError(`header is not valid JSON: ${cause}`);
    }
    if (header === null || typeof header !== "object" || Array.isArray(header)) {
        throw new CheckpointFormatError("header must be a JSON object");
    }

    const payload = bytes.slice(8 + headerLength);
    const checkpoint: Checkpoint = new Map();
    for (const name of Object.keys(header)) {
        if (name === "__metadata__") {
            continue;
        }
        const entry = header[name];
        const width = DTYPE_BYTES[entry?.dtype];
        if (width === undefined) {
            throw new CheckpointFormatError(
                `tensor ${name}: unsupported dtype ${entry?.dtype}`,
            );
        }
        const [begin, end] = entry.data_offsets ?? [NaN, NaN];
        const expected = numel(entry.shape) * width;
        if (
            !Number.isInteger(begin) ||
            !Number.isInteger(end) ||
            begin < 0 ||
            end > payload.byteLength ||
            end - begin !== expected
        ) {
            throw new CheckpointFormatError(
                `tensor ${name}: offsets [${begin}, ${end}] do not cover ` +
                    `${expected} bytes within a ${payload.byteLength}-byte payload`,
            );
        }
        checkpoint.set(name, {
            dtype: entry.dtype,
            shape: entry.shape.slice(),
            data: castToFloat32(entry.dtype, payload.slice(begin, end)),
        });
    }
    return checkpoint;
}
