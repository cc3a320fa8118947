/**
 * Runs a model over a prompt, hooks the attention internals during the
 * trailing prefill window and a short greedy decode, and writes the
 * engine's binary trace format.
 */

import { readFileSync, renameSync, writeFileSync } from "node:fs";
import { spawnSync } from "node:child_process";
import process from "node:process";

import { resolveModel, StepCapture, TinyGpt } from "./model.js";
import { encodeTrace, HeadBlock, TraceData } from "./tracefile.js";

export interface ExportSpec {
    modelId: string;
    promptPath: string;
    /** layer indices to export (default: all) */
    layerFilter?: number[];
    /** head indices to export (default: all) */
    headFilter?: number[];
    /** prefill attention-weight window; must match the engine's s */
    sWindow: number;
    sinkCount: number;
    maxDecodeSteps: number;
    maxPromptTokens?: number;
    seed?: number;
    outPath: string;
    checkJsonPath?: string;
    validate?: boolean;
}

export interface ExportResult {
    outPath: string;
    bytes: number;
    promptTokens: number;
    steps: number;
    layers: number[];
    heads: number[];
    generated: number[];
}

interface SampledLogits {
    step: number;
    layer: number;
    head: number;
    position: number;
    logits: number[];
}

export function exportTrace(spec: ExportSpec): ExportResult {
    const cfg = resolveModel(spec.modelId, spec.seed);
    const model = new TinyGpt(cfg);
    const { sWindow: s, sinkCount: sink } = spec;
    if (s < 1 || sink < 1) throw new Error("sWindow and sinkCount must be >= 1");

    const prompt = readFileSync(spec.promptPath);
    let tokens = Array.from(prompt.values());
    const cap = spec.maxPromptTokens ?? Math.min(tokens.length, cfg.ctx - spec.maxDecodeSteps - 1);
    tokens = tokens.slice(0, cap);
    const n0 = tokens.length;
    if (n0 <= sink + s) {
        throw new Error(
            `prompt tokenizes to ${n0} tokens; need more than sinkCount + s = ${sink + s}`);
    }
    if (n0 + spec.maxDecodeSteps > cfg.ctx) {
        throw new Error(`prompt (${n0}) + steps (${spec.maxDecodeSteps}) exceeds model context ${cfg.ctx}`);
    }

    const layers = normalizeFilter(spec.layerFilter, cfg.nLayers, "layer");
    const heads = normalizeFilter(spec.headFilter, cfg.nHeads, "head");
    const hd = model.headDim;
    const m0 = n0 - sink;

    // prefill: capture the attention weights of the trailing s steps and
    // the final step's queries
    const windowCaps = new Map<number, StepCapture>();
    let lastLogits: Float64Array | null = null;
    for (let p = 0; p < n0; p++) {
        const wantCapture = p >= n0 - s;
        const { logits, cap: stepCap } = model.step(tokens[p], wantCapture);
        if (stepCap) windowCaps.set(p, stepCap);
        lastLogits = logits;
    }

    // per exported head: prefill K/V from the cache, renormalized weights
    const blocks: HeadBlock[] = [];
    const renormFactors: number[][] = [];
    for (const layer of layers) {
        for (const head of heads) {
            const keys = new Float32Array(n0 * hd);
            const values = new Float32Array(n0 * hd);
            for (let p = 0; p < n0; p++) {
                keys.set(model.headSlice(model.cachedKey(layer, p), head), p * hd);
                values.set(model.headSlice(model.cachedValue(layer, p), head), p * hd);
            }
            const weights = new Float32Array(s * m0);
            const factors: number[] = [];
            for (let c = 0; c < s; c++) {
                const p = n0 - s + c;
                const row = windowCaps.get(p)!.attnWeights[layer][head];
                let nonSink = 0;
                for (let i = sink; i < row.length; i++) nonSink += row[i];
                factors.push(nonSink);
                if (nonSink <= 0) throw new Error(`zero non-sink mass at prefill step ${p}`);
                for (let i = sink; i < row.length; i++) {
                    weights[c * m0 + (i - sink)] = row[i] / nonSink;
                }
            }
            renormFactors.push(factors);
            const finalCap = windowCaps.get(n0 - 1)!;
            blocks.push({
                prefillKeys: keys,
                prefillValues: values,
                prefillWeights: weights,
                finalQuery: Float32Array.from(finalCap.queries[layer][head]),
                stepQueries: [],
                stepKeys: [],
                stepValues: [],
            });
        }
    }

    // greedy decode with per-step capture
    const generated: number[] = [];
    let sample: SampledLogits | null = null;
    const sampleStep = Math.floor(spec.maxDecodeSteps / 2);
    let next = TinyGpt.greedy(lastLogits!);
    for (let t = 0; t < spec.maxDecodeSteps; t++) {
        generated.push(next);
        const pos = model.positionsSeen;
        const { logits, cap: stepCap } = model.step(next, true);
        let bi = 0;
        for (const layer of layers) {
            for (const head of heads) {
                const b = blocks[bi++];
                b.stepQueries.push(Float32Array.from(stepCap!.queries[layer][head]));
                b.stepKeys.push(Float32Array.from(stepCap!.keys[layer][head]));
                b.stepValues.push(Float32Array.from(stepCap!.values[layer][head]));
            }
        }
        if (t === sampleStep && spec.checkJsonPath) {
            // the model's own scaled scores of this step's query against
            // every cached key before the step's own position, for the
            // first exported (layer, head); the engine re-derives these
            // from the written float32 trace
            const layer = layers[0];
            const head = heads[0];
            const q = stepCap!.queries[layer][head];
            const logitsRow: number[] = [];
            for (let i = 0; i < pos; i++) {
                const k = model.headSlice(model.cachedKey(layer, i), head);
                let acc = 0;
                for (let j = 0; j < hd; j++) acc += q[j] * k[j];
                logitsRow.push(acc / Math.sqrt(hd));
            }
            sample = { step: t, layer: 0, head: 0, position: pos, logits: logitsRow };
        }
        next = TinyGpt.greedy(logits);
    }

    const trace: TraceData = {
        layers: layers.length,
        heads: heads.length,
        d: hd,
        nPrefill: n0,
        steps: spec.maxDecodeSteps,
        s,
        sinkCount: sink,
        headBlocks: blocks,
    };
    const encoded = encodeTrace(trace);
    const tmp = `${spec.outPath}.tmp${process.pid}`;
    writeFileSync(tmp, encoded);
    renameSync(tmp, spec.outPath);

    if (spec.checkJsonPath) {
        const doc = {
            modelId: cfg.id,
            seed: cfg.seed,
            promptTokens: n0,
            steps: spec.maxDecodeSteps,
            exportedLayers: layers,
            exportedHeads: heads,
            headDim: hd,
            s,
            sinkCount: sink,
            generated,
            renormFactors,
            sample,
        };
        writeFileSync(spec.checkJsonPath, JSON.stringify(doc, null, 1) + "\n");
    }

    if (spec.validate) {
        validateWithEngine(spec.outPath);
    }

    return {
        outPath: spec.outPath,
        bytes: encoded.length,
        promptTokens: n0,
        steps: spec.maxDecodeSteps,
        layers,
        heads,
        generated,
    };
}

function normalizeFilter(filter: number[] | undefined, limit: number,
                         what: string): number[] {
    if (filter === undefined || filter.length === 0) {
        return Array.from({ length: limit }, (_, i) => i);
    }
    const sorted = [...new Set(filter)].sort((a, b) => a - b);
    for (const v of sorted) {
        if (v < 0 || v >= limit) {
            throw new Error(`${what} ${v} does not exist in the model (0..${limit - 1})`);
        }
    }
    return sorted;
}

/** Run the engine's reader over the written file when python is available. */
function validateWithEngine(path: string): void {
    const proc = spawnSync("python3", ["-m", "lfps.tracefile", path],
                           { encoding: "utf-8" });
    if (proc.error) {
        console.warn(`validation skipped: python3 not available (${proc.error.message})`);
        return;
    }
    if (proc.status !== 0) {
        throw new Error(`engine validation failed: ${proc.stderr.trim()}`);
    }
    console.log(proc.stdout.trim());
}
