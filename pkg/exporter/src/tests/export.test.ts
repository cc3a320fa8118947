import assert from "node:assert/strict";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import { exportTrace } from "../export.js";
import { crc32 } from "../tracefile.js";

const dir = mkdtempSync(join(tmpdir(), "lfps-exporter-"));
const promptPath = join(dir, "prompt.txt");
writeFileSync(promptPath, "The quick brown fox jumps over the lazy dog. ".repeat(4));

function doExport(name: string, extra: object = {}) {
    const outPath = join(dir, name);
    const res = exportTrace({
        modelId: "tiny-1l",
        promptPath,
        sWindow: 8,
        sinkCount: 2,
        maxDecodeSteps: 6,
        outPath,
        ...extra,
    });
    return { res, bytes: readFileSync(outPath) };
}

test("export writes a checksummed file of the declared size", () => {
    const { res, bytes } = doExport("a.lfps");
    assert.equal(res.bytes, bytes.length);
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.length);
    assert.deepEqual([...bytes.subarray(0, 4)], [0x4c, 0x46, 0x50, 0x53]);
    const payload = bytes.subarray(69, bytes.length - 4);
    assert.equal(view.getUint32(bytes.length - 4, true), crc32(payload));
    // header: layers, heads, d, n0, steps, s, sink, encoding
    const fields = Array.from({ length: 8 },
                              (_, i) => Number(view.getBigUint64(5 + 8 * i, true)));
    assert.deepEqual(fields.slice(0, 3), [1, 2, 16]);
    assert.equal(fields[3], res.promptTokens);
    assert.deepEqual(fields.slice(4), [6, 8, 2, 1]);
});

test("export is deterministic", () => {
    const a = doExport("b1.lfps").bytes;
    const b = doExport("b2.lfps").bytes;
    assert.deepEqual(a, b);
});

test("stored prefill weight rows are renormalized and causally padded", () => {
    const { res, bytes } = doExport("c.lfps", { checkJsonPath: join(dir, "c.json") });
    const n0 = res.promptTokens;
    const d = 16;
    const s = 8;
    const sink = 2;
    const m0 = n0 - sink;
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.length);
    const weightsOff = 69 + 2 * n0 * d * 4; // head block 0: after keys and values
    for (let c = 0; c < s; c++) {
        const stepPos = n0 - s + c;
        const support = stepPos - sink + 1;
        let sum = 0;
        for (let i = 0; i < m0; i++) {
            const w = view.getFloat32(weightsOff + (c * m0 + i) * 4, true);
            if (i < support) {
                sum += w;
            } else {
                assert.equal(w, 0);
            }
        }
        assert.ok(Math.abs(sum - 1) < 1e-5, `row ${c} sums to ${sum}`);
    }
    const check = JSON.parse(readFileSync(join(dir, "c.json"), "utf-8"));
    assert.equal(check.renormFactors.length, 2);
    assert.equal(check.renormFactors[0].length, s);
    assert.equal(check.sample.logits.length, check.promptTokens + check.sample.step);
});

test("head and layer filters select a dense subgrid", () => {
    const { bytes } = doExport("d.lfps", { headFilter: [1] });
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.length);
    assert.equal(Number(view.getBigUint64(5 + 8, true)), 1); // heads
    assert.throws(() => doExport("e.lfps", { headFilter: [7] }), /does not exist/);
    assert.throws(() => doExport("f.lfps", { layerFilter: [3] }), /does not exist/);
});

test("short prompts rejected", () => {
    const shortPath = join(dir, "short.txt");
    writeFileSync(shortPath, "tiny");
    assert.throws(
        () => exportTrace({
            modelId: "tiny-1l", promptPath: shortPath, sWindow: 8,
            sinkCount: 2, maxDecodeSteps: 2, outPath: join(dir, "g.lfps"),
        }),
        /need more than/);
});

test("prefill-only export", () => {
    const { res, bytes } = doExport("h.lfps", { maxDecodeSteps: 0 });
    assert.equal(res.steps, 0);
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.length);
    assert.equal(Number(view.getBigUint64(5 + 8 * 4, true)), 0);
});
