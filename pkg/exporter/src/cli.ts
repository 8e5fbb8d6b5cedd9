#!/usr/bin/env node
import { ExportError } from "./errors.js";
import { exportCheckpoint, readManifest } from "./export.js";

const USAGE =
    "usage: ptq-export export --manifest <m.json> [--checkpoint <path>] [--out <M.ptqb>]";

interface CliArgs {
    manifest: string;
    checkpoint?: string;
    out?: string;
}

class UsageError extends Error {}

function parseArgs(argv: string[]): CliArgs {
    if (argv[0] !== "export") {
        throw new UsageError(
            argv.length === 0 ? "missing subcommand" : `unknown subcommand ${argv[0]}`,
        );
    }
    const args: Partial<CliArgs> = {};
    for (let i = 1; i < argv.length; i += 2) {
        const flag = argv[i];
        const value = argv[i + 1];
        if (value === undefined) {
            throw new UsageError(`${flag} needs a value`);
        }
        if (flag === "--manifest") {
            args.manifest = value;
        } else if (flag === "--checkpoint") {
            args.checkpoint = value;
        } else if (flag === "--out") {
            args.out = value;
        } else {
            throw new UsageError(`unknown flag ${flag}`);
        }
    }
    if (args.manifest === undefined) {
        throw new UsageError("--manifest is required");
    }
    return args as CliArgs;
}

export function run(argv: string[]): number {
    let args: CliArgs;
    try {
        args = parseArgs(argv);
    } catch (error) {
        console.error((error as Error).message);
        console.error(USAGE);
        return 2;
    }
    try {
        const manifest = readManifest(args.manifest);
        const summary = exportCheckpoint(manifest, {
            checkpoint: args.checkpoint,
            out: args.out,
        });
        console.log(
            `exported ${summary.modelName}: ${summary.layers} layers, ` +
                `${summary.weights} weights -> ${summary.out}`,
        );
        if (summary.skipped.length > 0) {
            console.log(`skipped: ${summary.skipped.join(", ")}`);
        }
        return 0;
    } catch (error) {
        if (error instanceof ExportError || (error as NodeJS.ErrnoException).code) {
            console.error(`error: ${(error as Error).message}`);
            return 1;
        }
        throw error;
    }
}

process.exit(run(process.argv.slice(2)));
