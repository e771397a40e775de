/**
 * Deterministic random streams. Every consumer derives a child seed from
 * (base seed, path of integers) so runs are reproducible and independent
 * of evaluation order, mirroring the data generator's stream discipline.
 */

const MASK32 = 0xffffffff;

function splitmix32(x: number): number {
  x = (x + 0x9e3779b9) & MASK32;
  x ^= x >>> 16;
  x = Math.imul(x, 0x21f0aaad) & MASK32;
  x ^= x >>> 15;
  x = Math.imul(x, 0x735a2d97) & MASK32;
  x ^= x >>> 15;
  return x >>> 0;
}

export function deriveSeed(base: number, ...path: number[]): number {
  let h = splitmix32(base >>> 0);
  for (const p of path) {
    h = splitmix32((h ^ ((p >>> 0) + 0x9e3779b9)) >>> 0);
  }
  return h >>> 0;
}

export class Rng {
  private state: number;
  private spareGauss: number | null = null;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform in [0, 1). */
  next(): number {
    this.state = splitmix32(this.state);
    return this.state / 4294967296;
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n) % n;
  }

  /** Standard normal (Box-Muller). */
  gauss(): number {
    if (this.spareGauss !== null) {
      const v = this.spareGauss;
      this.spareGauss = null;
      return v;
    }
    let u = 0;
    while (u === 0) u = this.next();
    const r = Math.sqrt(-2 * Math.log(u));
    const theta = 2 * Math.PI * this.next();
    this.spareGauss = r * Math.sin(theta);
    return r * Math.cos(theta);
  }

  /** Fisher-Yates permutation of 0..n-1. */
  permutation(n: number): Int32Array {
    const p = new Int32Array(n);
    for (let i = 0; i < n; i++) p[i] = i;
    for (let i = n - 1; i > 0; i--) {
      const j = this.int(i + 1);
      const t = p[i];
      p[i] = p[j];
      p[j] = t;
    }
    return p;
  }
}
