/**
 * Command line: export a decode trace from a built-in model.
 *
 * Exit codes: 0 success, 1 runtime failure, 2 usage error.
 */

import process from "node:process";
import { pathToFileURL } from "node:url";

import { BUILTIN_MODELS } from "./model.js";
import { ExportSpec, exportTrace } from "./export.js";

const USAGE = `usage: node dist/cli.js export --prompt FILE -o TRACE [options]

options:
  --model ID          built-in model id (${Object.keys(BUILTIN_MODELS).join(", ")}; default tiny)
  --prompt FILE       text file; its bytes are the prompt tokens (required)
  --steps N           greedy decode steps to capture (default 16)
  --s N               prefill attention-weight window (default 16)
  --sink N            leading positions pinned as sinks (default 4)
  --layers A,B,...    layer indices to export (default: all)
  --heads A,B,...     head indices to export (default: all)
  --seed N            override the model's weight seed
  --max-prompt N      truncate the prompt to N tokens
  --check-json FILE   write sampled logits + renormalization diagnostics
  --validate          run the engine's reader over the output
  -o, --out FILE      output trace path (required)
`;

function fail(msg: string, code: number): never {
    console.error(`error: ${msg}`);
    if (code === 2) console.error(USAGE);
    process.exit(code);
}

function parseIntList(v: string): number[] {
    return v.split(",").filter((x) => x.trim() !== "").map((x) => {
        const n = Number.parseInt(x, 10);
        if (Number.isNaN(n)) throw new Error(`not an integer: ${x}`);
        return n;
    });
}

export function main(argv: string[]): number {
    if (argv.length === 0 || argv[0] !== "export") {
        fail(argv.length === 0 ? "missing command" : `unknown command ${argv[0]}`, 2);
    }
    const args = argv.slice(1);
    const opts: Record<string, string | boolean> = {};
    const aliases: Record<string, string> = { "-o": "--out" };
    for (let i = 0; i < args.length; i++) {
        let flag = args[i];
        flag = aliases[flag] ?? flag;
        if (!flag.startsWith("--")) fail(`unexpected argument ${flag}`, 2);
        const name = flag.slice(2);
        if (name === "validate") {
            opts[name] = true;
            continue;
        }
        const value = args[++i];
        if (value === undefined) fail(`flag ${flag} needs a value`, 2);
        opts[name] = value;
    }
    if (typeof opts.prompt !== "string") fail("--prompt is required", 2);
    if (typeof opts.out !== "string") fail("--out is required", 2);

    let spec: ExportSpec;
    try {
        spec = {
            modelId: (opts.model as string) ?? "tiny",
            promptPath: opts.prompt,
            sWindow: opts.s !== undefined ? Number.parseInt(opts.s as string, 10) : 16,
            sinkCount: opts.sink !== undefined ? Number.parseInt(opts.sink as string, 10) : 4,
            maxDecodeSteps: opts.steps !== undefined ? Number.parseInt(opts.steps as string, 10) : 16,
            layerFilter: opts.layers !== undefined ? parseIntList(opts.layers as string) : undefined,
            headFilter: opts.heads !== undefined ? parseIntList(opts.heads as string) : undefined,
            seed: opts.seed !== undefined ? Number.parseInt(opts.seed as string, 10) : undefined,
            maxPromptTokens: opts["max-prompt"] !== undefined
                ? Number.parseInt(opts["max-prompt"] as string, 10) : undefined,
            outPath: opts.out,
            checkJsonPath: opts["check-json"] as string | undefined,
            validate: opts.validate === true,
        };
    } catch (e) {
        fail((e as Error).message, 2);
    }

    try {
        const res = exportTrace(spec);
        console.log(
            `wrote ${res.outPath}: ${res.bytes} bytes, ` +
            `${res.promptTokens} prompt tokens, ${res.steps} decode steps, ` +
            `layers [${res.layers}] heads [${res.heads}]`);
        return 0;
    } catch (e) {
        console.error(`error: ${(e as Error).message}`);
        return 1;
    }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
    process.exit(main(process.argv.slice(2)));
}
