import { writeFileSync } from "node:fs";

export interface BundleLayer {
    layerIndex: number;
    kind: "conv" | "fc";
    m: number;
    n: number;
    k: number;
    tensorName: string;
}

export interface BundleTensor {
    name: string;
    shape: number[];
    data: Float32Array;
}

/** JSON with recursively sorted keys and no whitespace. */
export function canonicalJson(value: unknown): string {
    if (Array.isArray(value)) {
        return "[" + value.map(canonicalJson).join(",") + "]";
    }
    if (value !== null && typeof value === "object") {
        const record = value as Record<string, unknown>;
        const fields = Object.keys(record)
            .sort()
            .map((key) => JSON.stringify(key) + ":" + canonicalJson(record[key]));
        return "{" + fields.join(",") + "}";
    }
    return JSON.stringify(value);
}

const MAGIC = "PTQB";
const FORMAT_VERSION = 1;

/**
 * Write a .ptqb weight bundle: 4-byte magic, u32 LE version, u64 LE
 * header length, canonical JSON header, then the raw float32 tensor
 * payload in ascending tensor-name order.
 */
export function writeBundle(
    path: string,
    modelName: string,
    layers: BundleLayer[],
    tensors: BundleTensor[],
): void {
    const ordered = [...tensors].sort((a, b) => (a.name < b.name ? -1 : 1));
    const table: Record<string, { shape: number[]; offset: number; nbytes: number }> =
        {};
    const chunks: Buffer[] = [];
    let offset = 0;
    for (const tensor of ordered) {
        const raw = Buffer.alloc(4 * tensor.data.length);
        for (let i = 0; i < tensor.data.length; i++) {
            raw.writeFloatLE(tensor.data[i], 4 * i);
        }
        table[tensor.name] = {
            shape: tensor.shape.slice(),
            offset,
            nbytes: raw.length,
        };
        chunks.push(raw);
        offset += raw.length;
    }

    const header = canonicalJson({
        model_name: modelName,
        layers: [...layers]
            .sort((a, b) => a.layerIndex - b.layerIndex)
            .map((layer) => ({
                layer_index: layer.layerIndex,
                kind: layer.kind,
                m: layer.m,
                n: layer.n,
                k: layer.k,
                tensor_name: layer.tensorName,
            })),
        tensors: table,
    });
    const headerBytes = Buffer.from(header, "utf-8");

    const envelope = Buffer.alloc(16);
    envelope.write(MAGIC, 0, "ascii");
    envelope.writeUInt32LE(FORMAT_VERSION, 4);
    envelope.writeBigUInt64LE(BigInt(headerBytes.length), 8);
    writeFileSync(path, Buffer.concat([envelope, headerBytes, ...chunks]));
}
