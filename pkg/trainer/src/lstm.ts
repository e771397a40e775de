/**
 * Recurrent head: single-layer LSTM over frozen per-frame features,
 * followed by a linear class layer. Losses are per-frame cross-entropy
 * (every frame gets a prediction, matching the majority-voting
 * protocol), trained with full backpropagation through time and Adam.
 */

import { AdamState, adamStep, softmaxInPlace } from "./linear.js";
import { Rng } from "./rng.js";

export interface LstmHeadState {
  kind: "recurrent";
  dim: number;
  hidden: number;
  numClasses: number;
  wx: number[];
  wh: number[];
  b: number[];
  wo: number[];
  bo: number[];
  mean: number[];
  std: number[];
}

const sigmoid = (x: number) => 1 / (1 + Math.exp(-x));

export class LstmHead {
  readonly kind = "recurrent";
  wx: Float64Array; // 4H x D, gate order i,f,g,o
  wh: Float64Array; // 4H x H
  b: Float64Array; // 4H
  wo: Float64Array; // C x H
  bo: Float64Array; // C
  mean: Float64Array;
  std: Float64Array;
  private adam: Record<string, AdamState> = {};
  private grads: Record<string, Float64Array> = {};
  private pending = 0;

  constructor(
    readonly dim: number,
    readonly hidden: number,
    readonly numClasses: number,
    rng?: Rng,
  ) {
    const H = hidden;
    this.wx = new Float64Array(4 * H * dim);
    this.wh = new Float64Array(4 * H * H);
    this.b = new Float64Array(4 * H);
    this.wo = new Float64Array(numClasses * H);
    this.bo = new Float64Array(numClasses);
    this.mean = new Float64Array(dim);
    this.std = new Float64Array(dim).fill(1);
    if (rng) {
      const sx = 1 / Math.sqrt(dim);
      const sh = 1 / Math.sqrt(H);
      for (let i = 0; i < this.wx.length; i++) this.wx[i] = sx * rng.gauss();
      for (let i = 0; i < this.wh.length; i++) this.wh[i] = sh * rng.gauss();
      for (let i = 0; i < this.wo.length; i++) this.wo[i] = sh * rng.gauss();
      for (let i = H; i < 2 * H; i++) this.b[i] = 1.0; // forget-gate bias
    }
    for (const name of ["wx", "wh", "b", "wo", "bo"] as const) {
      const len = this[name].length;
      this.adam[name] = {
        m: new Float64Array(len),
        v: new Float64Array(len),
        t: 0,
      };
      this.grads[name] = new Float64Array(len);
    }
  }

  setNormalization(mean: Float64Array, std: Float64Array): void {
    this.mean = mean;
    this.std = std;
  }

  private norm(frames: Float32Array[]): Float64Array[] {
    return frames.map((f) => {
      const out = new Float64Array(this.dim);
      for (let i = 0; i < this.dim; i++) out[i] = (f[i] - this.mean[i]) / this.std[i];
      return out;
    });
  }

  private forward(xs: Float64Array[]) {
    const H = this.hidden;
    const T = xs.length;
    const gates: Float64Array[] = [];
    const cs: Float64Array[] = [];
    const hs: Float64Array[] = [new Float64Array(H)];
    const tanhc: Float64Array[] = [];
    for (let t = 0; t < T; t++) {
      const z = new Float64Array(4 * H);
      const hPrev = hs[t];
      const x = xs[t];
      for (let r = 0; r < 4 * H; r++) {
        let s = this.b[r];
        const offX = r * this.dim;
        for (let i = 0; i < this.dim; i++) s += this.wx[offX + i] * x[i];
        const offH = r * H;
        for (let i = 0; i < H; i++) s += this.wh[offH + i] * hPrev[i];
        z[r] = s;
      }
      const c = new Float64Array(H);
      const h = new Float64Array(H);
      const tc = new Float64Array(H);
      const cPrev = t > 0 ? cs[t - 1] : new Float64Array(H);
      for (let j = 0; j < H; j++) {
        const ig = sigmoid(z[j]);
        const fg = sigmoid(z[H + j]);
        const gg = Math.tanh(z[2 * H + j]);
        const og = sigmoid(z[3 * H + j]);
        z[j] = ig;
        z[H + j] = fg;
        z[2 * H + j] = gg;
        z[3 * H + j] = og;
        c[j] = fg * cPrev[j] + ig * gg;
        tc[j] = Math.tanh(c[j]);
        h[j] = og * tc[j];
      }
      gates.push(z);
      cs.push(c);
      tanhc.push(tc);
      hs.push(h);
    }
    return { gates, cs, hs, tanhc };
  }

  /** Per-frame class probabilities for one sequence. */
  predictSequence(frames: Float32Array[]): Float32Array[] {
    const xs = this.norm(frames);
    const { hs } = this.forward(xs);
    const out: Float32Array[] = [];
    for (let t = 0; t < frames.length; t++) {
      const logits = new Float64Array(this.numClasses);
      for (let c = 0; c < this.numClasses; c++) {
        let s = this.bo[c];
        const off = c * this.hidden;
        for (let j = 0; j < this.hidden; j++) s += this.wo[off + j] * hs[t + 1][j];
        logits[c] = s;
      }
      softmaxInPlace(logits);
      out.push(Float32Array.from(logits));
    }
    return out;
  }

  meanLoss(frames: Float32Array[], labels: number[]): number {
    const probs = this.predictSequence(frames);
    let loss = 0;
    for (let t = 0; t < labels.length; t++) {
      loss += -Math.log(probs[t][labels[t]] + 1e-12);
    }
    return loss / labels.length;
  }

  /** Accumulate BPTT gradients for one sequence; returns its mean loss. */
  accumulate(frames: Float32Array[], labels: number[]): number {
    const H = this.hidden;
    const C = this.numClasses;
    const T = frames.length;
    const xs = this.norm(frames);
    const { gates, cs, hs, tanhc } = this.forward(xs);

    const dhOut: Float64Array[] = [];
    let loss = 0;
    for (let t = 0; t < T; t++) {
      const logits = new Float64Array(C);
      for (let c = 0; c < C; c++) {
        let s = this.bo[c];
        const off = c * H;
        for (let j = 0; j < H; j++) s += this.wo[off + j] * hs[t + 1][j];
        logits[c] = s;
      }
      softmaxInPlace(logits);
      loss += -Math.log(logits[labels[t]] + 1e-12);
      const dh = new Float64Array(H);
      for (let c = 0; c < C; c++) {
        const g = (logits[c] - (c === labels[t] ? 1 : 0)) / T;
        this.grads.bo[c] += g;
        const off = c * H;
        for (let j = 0; j < H; j++) {
          this.grads.wo[off + j] += g * hs[t + 1][j];
          dh[j] += this.wo[off + j] * g;
        }
      }
      dhOut.push(dh);
    }

    let dhNext = new Float64Array(H);
    let dcNext = new Float64Array(H);
    for (let t = T - 1; t >= 0; t--) {
      const z = gates[t];
      const cPrev = t > 0 ? cs[t - 1] : new Float64Array(H);
      const dz = new Float64Array(4 * H);
      const dhPrev = new Float64Array(H);
      const dcPrev = new Float64Array(H);
      for (let j = 0; j < H; j++) {
        const dh = dhOut[t][j] + dhNext[j];
        const ig = z[j];
        const fg = z[H + j];
        const gg = z[2 * H + j];
        const og = z[3 * H + j];
        const tc = tanhc[t][j];
        const dc = dh * og * (1 - tc * tc) + dcNext[j];
        dz[j] = dc * gg * ig * (1 - ig);
        dz[H + j] = dc * cPrev[j] * fg * (1 - fg);
        dz[2 * H + j] = dc * ig * (1 - gg * gg);
        dz[3 * H + j] = dh * tc * og * (1 - og);
        dcPrev[j] = dc * fg;
      }
      const hPrev = hs[t];
      const x = xs[t];
      for (let r = 0; r < 4 * H; r++) {
        const d = dz[r];
        if (d === 0) continue;
        this.grads.b[r] += d;
        const offX = r * this.dim;
        for (let i = 0; i < this.dim; i++) this.grads.wx[offX + i] += d * x[i];
        const offH = r * H;
        for (let i = 0; i < H; i++) {
          this.grads.wh[offH + i] += d * hPrev[i];
          dhPrev[i] += this.wh[offH + i] * d;
        }
      }
      dhNext = dhPrev;
      dcNext = dcPrev;
    }
    this.pending++;
    return loss / T;
  }

  /** Apply accumulated gradients (averaged over sequences) with Adam. */
  step(lr: number): void {
    if (this.pending === 0) return;
    for (const name of ["wx", "wh", "b", "wo", "bo"] as const) {
      const g = this.grads[name];
      for (let i = 0; i < g.length; i++) g[i] /= this.pending;
      adamStep(this[name], g, this.adam[name], lr);
      g.fill(0);
    }
    this.pending = 0;
  }

  snapshot(): LstmHeadState {
    return {
      kind: "recurrent",
      dim: this.dim,
      hidden: this.hidden,
      numClasses: this.numClasses,
      wx: Array.from(this.wx),
      wh: Array.from(this.wh),
      b: Array.from(this.b),
      wo: Array.from(this.wo),
      bo: Array.from(this.bo),
      mean: Array.from(this.mean),
      std: Array.from(this.std),
    };
  }

  static fromState(s: LstmHeadState): LstmHead {
    const head = new LstmHead(s.dim, s.hidden, s.numClasses);
    head.wx.set(s.wx);
    head.wh.set(s.wh);
    head.b.set(s.b);
    head.wo.set(s.wo);
    head.bo.set(s.bo);
    head.mean = Float64Array.from(s.mean);
    head.std = Float64Array.from(s.std);
    return head;
  }
}
