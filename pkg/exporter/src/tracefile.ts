/**
 * Binary trace writer, byte-identical to the engine's container
 * (see ../../docs/trace_format.md):
 *
 *   magic "LFPS" | version u8=1 | 8 x u64 LE header fields |
 *   f32 LE payload | CRC-32 of the payload, u32 LE
 *
 * Header fields: layers, heads, d, nPrefill, steps, s, sinkCount,
 * valueEncoding (1 = float32).  Payload: per (layer, head) block of
 * prefill keys/values (n x d each), prefill weights (s x (n - sink)),
 * final query (d); then per step per head: query, new key, new value.
 */

export interface HeadBlock {
    prefillKeys: Float32Array;    // n * d
    prefillValues: Float32Array;  // n * d
    prefillWeights: Float32Array; // s * (n - sink)
    finalQuery: Float32Array;     // d
    stepQueries: Float32Array[];  // steps x d
    stepKeys: Float32Array[];
    stepValues: Float32Array[];
}

export interface TraceData {
    layers: number;
    heads: number;
    d: number;
    nPrefill: number;
    steps: number;
    s: number;
    sinkCount: number;
    headBlocks: HeadBlock[]; // layer-major
}

const MAGIC = [0x4c, 0x46, 0x50, 0x53]; // "LFPS"
const VERSION = 1;
const ENCODING_F32 = 1;
const HEADER_BYTES = 4 + 1 + 8 * 8;

const CRC_TABLE = (() => {
    const table = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
        let c = n;
        for (let k = 0; k < 8; k++) {
            c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
        }
        table[n] = c >>> 0;
    }
    return table;
})();

/** CRC-32 (zlib polynomial) of a byte range. */
export function crc32(bytes: Uint8Array): number {
    let c = 0xffffffff;
    for (let i = 0; i < bytes.length; i++) {
        c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
    }
    return (c ^ 0xffffffff) >>> 0;
}

export function traceByteLength(t: TraceData): number {
    const m0 = t.nPrefill - t.sinkCount;
    const perHead = 4 * (2 * t.nPrefill * t.d + t.s * m0 + t.d);
    const perStep = t.layers * t.heads * 3 * t.d * 4;
    return HEADER_BYTES + t.layers * t.heads * perHead + t.steps * perStep + 4;
}

/** Serialize a trace into one buffer (header + payload + checksum). */
export function encodeTrace(t: TraceData): Uint8Array {
    const m0 = t.nPrefill - t.sinkCount;
    if (m0 < 1) throw new Error("nPrefill must exceed sinkCount");
    if (t.headBlocks.length !== t.layers * t.heads) {
        throw new Error(`expected ${t.layers * t.heads} head blocks, got ${t.headBlocks.length}`);
    }

    const total = traceByteLength(t);
    const buf = new ArrayBuffer(total);
    const bytes = new Uint8Array(buf);
    const view = new DataView(buf);

    for (let i = 0; i < 4; i++) bytes[i] = MAGIC[i];
    view.setUint8(4, VERSION);
    const headerFields = [t.layers, t.heads, t.d, t.nPrefill, t.steps, t.s,
                          t.sinkCount, ENCODING_F32];
    headerFields.forEach((v, i) => view.setBigUint64(5 + 8 * i, BigInt(v), true));

    let off = HEADER_BYTES;
    const putF32 = (arr: Float32Array, expect: number, what: string) => {
        if (arr.length !== expect) {
            throw new Error(`${what}: expected ${expect} floats, got ${arr.length}`);
        }
        for (let i = 0; i < arr.length; i++) {
            view.setFloat32(off, arr[i], true);
            off += 4;
        }
    };

    t.headBlocks.forEach((h, i) => {
        putF32(h.prefillKeys, t.nPrefill * t.d, `head ${i} prefill keys`);
        putF32(h.prefillValues, t.nPrefill * t.d, `head ${i} prefill values`);
        putF32(h.prefillWeights, t.s * m0, `head ${i} prefill weights`);
        putF32(h.finalQuery, t.d, `head ${i} final query`);
    });
    for (let step = 0; step < t.steps; step++) {
        t.headBlocks.forEach((h, i) => {
            putF32(h.stepQueries[step], t.d, `head ${i} step ${step} query`);
            putF32(h.stepKeys[step], t.d, `head ${i} step ${step} key`);
            putF32(h.stepValues[step], t.d, `head ${i} step ${step} value`);
        });
    }

    const payload = bytes.subarray(HEADER_BYTES, total - 4);
    view.setUint32(total - 4, crc32(payload), true);
    return bytes;
}
