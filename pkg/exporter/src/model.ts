/**
 * A small causal transformer with a per-layer KV cache and attention
 * capture hooks.
 *
 * Weights are drawn from a seeded PRNG, so the model is fully
 * deterministic and self-contained: no downloads, no external files.
 * The architecture is the standard pre-norm decoder block (LN -> causal
 * multi-head attention -> residual, LN -> gelu MLP -> residual) with a
 * byte-level vocabulary and tied unembedding.
 */

import { Rng } from "./prng.js";
import {
    addInPlace, dot, geluInPlace, layerNorm, matVec, softmaxInPlace,
} from "./tensor.js";

export interface ModelConfig {
    id: string;
    vocab: number;
    dModel: number;
    nHeads: number;
    nLayers: number;
    ctx: number;
    seed: number;
}

export const BUILTIN_MODELS: Record<string, ModelConfig> = {
    tiny: { id: "tiny", vocab: 256, dModel: 64, nHeads: 4, nLayers: 2, ctx: 4096, seed: 1234 },
    "tiny-1l": { id: "tiny-1l", vocab: 256, dModel: 32, nHeads: 2, nLayers: 1, ctx: 2048, seed: 99 },
};

interface Block {
    ln1g: Float64Array;
    ln1b: Float64Array;
    wq: Float64Array;
    wk: Float64Array;
    wv: Float64Array;
    wo: Float64Array;
    ln2g: Float64Array;
    ln2b: Float64Array;
    w1: Float64Array;
    w2: Float64Array;
}

/** Attention internals captured for one token step. [layer][head]. */
export interface StepCapture {
    queries: Float64Array[][];
    keys: Float64Array[][];
    values: Float64Array[][];
    /** Softmax weights over positions 0..pos inclusive. */
    attnWeights: Float64Array[][];
}

export class TinyGpt {
    readonly cfg: ModelConfig;
    readonly headDim: number;
    private tokEmb: Float64Array;
    private posEmb: Float64Array;
    private blocks: Block[];
    private lnFg: Float64Array;
    private lnFb: Float64Array;
    /** cache[layer] holds one dModel-wide k and v row per seen position. */
    private cacheK: Float64Array[][];
    private cacheV: Float64Array[][];

    constructor(cfg: ModelConfig) {
        if (cfg.dModel % cfg.nHeads !== 0) {
            throw new Error("dModel must be divisible by nHeads");
        }
        this.cfg = cfg;
        this.headDim = cfg.dModel / cfg.nHeads;
        const rng = new Rng(cfg.seed);
        const d = cfg.dModel;
        const std = 0.7 / Math.sqrt(d);
        this.tokEmb = rng.gaussianArray(cfg.vocab * d, 1.0 / Math.sqrt(d));
        this.posEmb = rng.gaussianArray(cfg.ctx * d, 0.5 / Math.sqrt(d));
        this.blocks = [];
        for (let l = 0; l < cfg.nLayers; l++) {
            this.blocks.push({
                ln1g: ones(d), ln1b: new Float64Array(d),
                wq: rng.gaussianArray(d * d, std),
                wk: rng.gaussianArray(d * d, std),
                wv: rng.gaussianArray(d * d, std),
                wo: rng.gaussianArray(d * d, std),
                ln2g: ones(d), ln2b: new Float64Array(d),
                w1: rng.gaussianArray(4 * d * d, std),
                w2: rng.gaussianArray(d * 4 * d, std / 2),
            });
        }
        this.lnFg = ones(d);
        this.lnFb = new Float64Array(d);
        this.cacheK = Array.from({ length: cfg.nLayers }, () => []);
        this.cacheV = Array.from({ length: cfg.nLayers }, () => []);
    }

    get positionsSeen(): number {
        return this.cacheK[0].length;
    }

    resetCache(): void {
        for (let l = 0; l < this.cfg.nLayers; l++) {
            this.cacheK[l] = [];
            this.cacheV[l] = [];
        }
    }

    headSlice(row: Float64Array, head: number): Float64Array {
        return row.slice(head * this.headDim, (head + 1) * this.headDim);
    }

    /**
     * Process one token at the next position. Returns the next-token
     * logits and, when requested, the attention internals of the step.
     */
    step(token: number, capture = false): { logits: Float64Array; cap: StepCapture | null } {
        const { dModel: d, nHeads, ctx, vocab } = this.cfg;
        const pos = this.positionsSeen;
        if (pos >= ctx) throw new Error(`context overflow at position ${pos}`);
        if (token < 0 || token >= vocab) throw new Error(`token ${token} out of range`);
        const hd = this.headDim;
        const scale = 1.0 / Math.sqrt(hd);

        const x = new Float64Array(d);
        for (let i = 0; i < d; i++) {
            x[i] = this.tokEmb[token * d + i] + this.posEmb[pos * d + i];
        }

        const cap: StepCapture | null = capture
            ? { queries: [], keys: [], values: [], attnWeights: [] }
            : null;

        for (let l = 0; l < this.cfg.nLayers; l++) {
            const blk = this.blocks[l];
            const h = layerNorm(x, blk.ln1g, blk.ln1b);
            const q = matVec(blk.wq, d, d, h);
            const k = matVec(blk.wk, d, d, h);
            const v = matVec(blk.wv, d, d, h);
            this.cacheK[l].push(k);
            this.cacheV[l].push(v);
            const seen = this.cacheK[l].length;

            const attnOut = new Float64Array(d);
            const capQ: Float64Array[] = [];
            const capK: Float64Array[] = [];
            const capV: Float64Array[] = [];
            const capW: Float64Array[] = [];
            for (let head = 0; head < nHeads; head++) {
                const qh = this.headSlice(q, head);
                const logits = new Float64Array(seen);
                for (let i = 0; i < seen; i++) {
                    const kh = this.cacheK[l][i].subarray(head * hd, (head + 1) * hd);
                    logits[i] = dot(qh, kh as Float64Array) * scale;
                }
                softmaxInPlace(logits);
                for (let i = 0; i < seen; i++) {
                    const vh = this.cacheV[l][i];
                    const w = logits[i];
                    const base = head * hd;
                    for (let j = 0; j < hd; j++) attnOut[base + j] += w * vh[base + j];
                }
                if (cap) {
                    capQ.push(qh);
                    capK.push(this.headSlice(k, head));
                    capV.push(this.headSlice(v, head));
                    capW.push(logits.slice());
                }
            }
            if (cap) {
                cap.queries.push(capQ);
                cap.keys.push(capK);
                cap.values.push(capV);
                cap.attnWeights.push(capW);
            }
            addInPlace(x, matVec(blk.wo, d, d, attnOut));

            const h2 = layerNorm(x, blk.ln2g, blk.ln2b);
            const mid = matVec(blk.w1, 4 * d, d, h2);
            geluInPlace(mid);
            addInPlace(x, matVec(blk.w2, d, 4 * d, mid));
        }

        const final = layerNorm(x, this.lnFg, this.lnFb);
        const logits = matVec(this.tokEmb, vocab, d, final);
        return { logits, cap };
    }

    /** Greedy next token; equal logits resolve to the lowest token id. */
    static greedy(logits: Float64Array): number {
        let best = 0;
        for (let i = 1; i < logits.length; i++) {
            if (logits[i] > logits[best]) best = i;
        }
        return best;
    }

    /** Cached key row (full dModel width) for a layer and position. */
    cachedKey(layer: number, pos: number): Float64Array {
        return this.cacheK[layer][pos];
    }

    cachedValue(layer: number, pos: number): Float64Array {
        return this.cacheV[layer][pos];
    }
}

function ones(n: number): Float64Array {
    const a = new Float64Array(n);
    a.fill(1.0);
    return a;
}

export function resolveModel(id: string, seed?: number): ModelConfig {
    const base = BUILTIN_MODELS[id];
    if (!base) {
        const known = Object.keys(BUILTIN_MODELS).join(", ");
        throw new Error(`unknown model "${id}" (built-in models: ${known})`);
    }
    return seed === undefined ? base : { ...base, seed };
}
