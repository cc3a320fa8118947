/** Minimal dense math on Float64Array buffers (row-major matrices). */

/** y = M x where M is (rows x cols) row-major. */
export function matVec(m: Float64Array, rows: number, cols: number,
                       x: Float64Array): Float64Array {
    const y = new Float64Array(rows);
    for (let r = 0; r < rows; r++) {
        let acc = 0;
        const base = r * cols;
        for (let c = 0; c < cols; c++) acc += m[base + c] * x[c];
        y[r] = acc;
    }
    return y;
}

export function addInPlace(a: Float64Array, b: Float64Array): void {
    for (let i = 0; i < a.length; i++) a[i] += b[i];
}

export function dot(a: Float64Array, b: Float64Array): number {
    let acc = 0;
    for (let i = 0; i < a.length; i++) acc += a[i] * b[i];
    return acc;
}

/** In-place layer norm with learned gain and bias. */
export function layerNorm(x: Float64Array, gain: Float64Array,
                          bias: Float64Array): Float64Array {
    const n = x.length;
    let mean = 0;
    for (let i = 0; i < n; i++) mean += x[i];
    mean /= n;
    let varAcc = 0;
    for (let i = 0; i < n; i++) {
        const c = x[i] - mean;
        varAcc += c * c;
    }
    const inv = 1.0 / Math.sqrt(varAcc / n + 1e-5);
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
    return out;
}

/** Numerically stable in-place softmax. */
export function softmaxInPlace(x: Float64Array): void {
    let max = -Infinity;
    for (let i = 0; i < x.length; i++) if (x[i] > max) max = x[i];
    let sum = 0;
    for (let i = 0; i < x.length; i++) {
        x[i] = Math.exp(x[i] - max);
        sum += x[i];
    }
    for (let i = 0; i < x.length; i++) x[i] /= sum;
}

/** tanh-approximation gelu, applied in place. */
export function geluInPlace(x: Float64Array): void {
    const k = Math.sqrt(2 / Math.PI);
    for (let i = 0; i < x.length; i++) {
        const v = x[i];
        x[i] = 0.5 * v * (1 + Math.tanh(k * (v + 0.044715 * v * v * v)));
    }
}
