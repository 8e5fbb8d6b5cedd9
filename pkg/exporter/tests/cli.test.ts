import { spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

const CLI = join(dirname(fileURLToPath(import.meta.url)), "..", "dist", "cli.js");

function cli(...argv: string[]) {
    return spawnSync("node", [CLI, ...argv], { encoding: "utf-8" });
}

function f32buf(values: number[]): Buffer {
    const raw = Buffer.alloc(4 * values.length);
    values.forEach((value, i) => raw.writeFloatLE(Math.fround(value), 4 * i));
    return raw;
}

function fixture() {
    const dir = mkdtempSync(join(tmpdir(), "ptqexp-cli-"));
    const checkpoint = join(dir, "net.safetensors");
    const header = Buffer.from(
        JSON.stringify({
            "fc.weight": { dtype: "F32", shape: [2, 3], data_offsets: [0, 24] },
            "fc.bias": { dtype: "F32", shape: [2], data_offsets: [24, 32] },
        }),
        "utf-8",
    );
    const prefix = Buffer.alloc(8);
    prefix.writeBigUInt64LE(BigInt(header.length));
    writeFileSync(
        checkpoint,
        Buffer.concat([
            prefix,
            header,
            f32buf([0.5, -0.25, 0.125, 1.0, -1.0, 0.75]),
            f32buf([0.1, 0.2]),
        ]),
    );
    const manifest = join(dir, "m.json");
    writeFileSync(
        manifest,
        JSON.stringify({
            checkpoint,
            output: join(dir, "net.ptqb"),
            mapping: { "fc.weight": { layer_index: 0, kind: "fc", m: 2, n: 3, k: 1 } },
        }),
    );
    return { dir, checkpoint, manifest };
}

describe("ptq-export cli", () => {
    it("is built before the tests run", () => {
        expect(existsSync(CLI), `missing ${CLI}; run npm run build`).toBe(true);
    });

    it("exports with paths from the manifest and prints a summary", () => {
        const { dir, manifest } = fixture();
        const result = cli("export", "--manifest", manifest);
        expect(result.status, result.stderr).toBe(0);
        expect(result.stdout).toContain("exported net: 1 layers, 6 weights");
        expect(result.stdout).toContain("skipped: fc.bias");
        expect(existsSync(join(dir, "net.ptqb"))).toBe(true);

        const inspect = spawnSync(
            "python3",
            ["-m", "ptqkit", "inspect", join(dir, "net.ptqb")],
            { encoding: "utf-8" },
        );
        expect(inspect.status, inspect.stderr).toBe(0);
    });

    it("lets --checkpoint and --out override the manifest", () => {
        const { dir, checkpoint, manifest } = fixture();
        const out = join(dir, "other.ptqb");
        const result = cli(
            "export",
            "--manifest",
            manifest,
            "--checkpoint",
            checkpoint,
            "--out",
            out,
        );
        expect(result.status, result.stderr).toBe(0);
        expect(existsSync(out)).toBe(true);
    });

    it("exits 2 on usage errors", () => {
        expect(cli().status).toBe(2);
        expect(cli("convert").status).toBe(2);
        expect(cli("export").status).toBe(2); // --manifest missing
        expect(cli("export", "--manifest").status).toBe(2); // value missing
        const { manifest } = fixture();
        const unknown = cli("export", "--manifest", manifest, "--fast", "yes");
        expect(unknown.status).toBe(2);
        expect(unknown.stderr).toContain("usage:");
    });

    it("exits 1 on data errors with a message on stderr", () => {
        const { dir, manifest } = fixture();
        const missing = cli(
            "export",
            "--manifest",
            manifest,
            "--checkpoint",
            join(dir, "nope.safetensors"),
        );
        expect(missing.status).toBe(1);
        expect(missing.stderr).toContain("error:");

        const badManifest = join(dir, "bad.json");
        writeFileSync(badManifest, "{not json");
        const malformed = cli("export", "--manifest", badManifest);
        expect(malformed.status).toBe(1);
        expect(malformed.stderr).toContain("error:");
    });
});
