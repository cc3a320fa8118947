/**
 * Deterministic PRNG (sfc32) with gaussian draws via Box-Muller.
 * Identical sequences on every platform for a given seed.
 */
export class Rng {
    private a: number;
    private b: number;
    private c: number;
    private d: number;
    private spareGaussian: number | null = null;

    constructor(seed: number) {
        // splitmix32-style seeding of the four state words
        let s = seed >>> 0;
        const next = () => {
            s = (s + 0x9e3779b9) >>> 0;
            let z = s;
            z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
            z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
            return (z ^ (z >>> 15)) >>> 0;
        };
        this.a = next();
        this.b = next();
        this.c = next();
        this.d = next();
        for (let i = 0; i < 12; i++) this.uint32();
    }

    uint32(): number {
        const t = (((this.a + this.b) >>> 0) + this.d) >>> 0;
        this.d = (this.d + 1) >>> 0;
        this.a = this.b ^ (this.b >>> 9);
        this.b = (this.c + (this.c << 3)) >>> 0;
        this.c = ((this.c << 21) | (this.c >>> 11)) >>> 0;
        this.c = (this.c + t) >>> 0;
        return t;
    }

    /** Uniform in [0, 1). */
    float(): number {
        return this.uint32() / 4294967296;
    }

    /** Standard normal draw. */
    gaussian(): number {
        if (this.spareGaussian !== null) {
            const v = this.spareGaussian;
            this.spareGaussian = null;
            return v;
        }
        let u = 0;
        let v = 0;
        do {
            u = this.float();
        } while (u === 0);
        v = this.float();
        const r = Math.sqrt(-2.0 * Math.log(u));
        this.spareGaussian = r * Math.sin(2 * Math.PI * v);
        return r * Math.cos(2 * Math.PI * v);
    }

    /** Float64Array of gaussians scaled by std. */
    gaussianArray(length: number, std = 1.0): Float64Array {
        const out = new Float64Array(length);
        for (let i = 0; i < length; i++) out[i] = this.gaussian() * std;
        return out;
    }
}
