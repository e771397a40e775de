/**
 * Fully-connected head: a single linear layer over frozen per-frame
 * features with softmax cross-entropy, trained with Adam. Frames are
 * classified independently; sequence-level decisions happen downstream
 * via majority voting.
 */

import { Rng } from "./rng.js";

export interface AdamState {
  m: Float64Array;
  v: Float64Array;
  t: number;
}

export function adamStep(
  theta: Float64Array,
  grad: Float64Array,
  state: AdamState,
  lr: number,
  beta1 = 0.9,
  beta2 = 0.999,
  eps = 1e-8,
): void {
  state.t++;
  const c1 = 1 - Math.pow(beta1, state.t);
  const c2 = 1 - Math.pow(beta2, state.t);
  const { m, v } = state;
  for (let i = 0; i < theta.length; i++) {
    m[i] = beta1 * m[i] + (1 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1 - beta2) * grad[i] * grad[i];
    theta[i] -= (lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + eps);
  }
}

export function softmaxInPlace(logits: Float64Array | Float32Array): void {
  let mx = -Infinity;
  for (let i = 0; i < logits.length; i++) if (logits[i] > mx) mx = logits[i];
  let sum = 0;
  for (let i = 0; i < logits.length; i++) {
    logits[i] = Math.exp(logits[i] - mx);
    sum += logits[i];
  }
  for (let i = 0; i < logits.length; i++) logits[i] /= sum;
}

export interface LinearHeadState {
  kind: "fc";
  dim: number;
  numClasses: number;
  weights: number[]; // (dim * C) + C bias, row-major by class
  mean: number[];
  std: number[];
}

export class LinearHead {
  readonly kind = "fc";
  w: Float64Array; // C x dim
  b: Float64Array; // C
  mean: Float64Array;
  std: Float64Array;
  private adamW: AdamState;
  private adamB: AdamState;
  private l2 = 1e-4;

  constructor(
    readonly dim: number,
    readonly numClasses: number,
    rng?: Rng,
  ) {
    this.w = new Float64Array(numClasses * dim);
    this.b = new Float64Array(numClasses);
    this.mean = new Float64Array(dim);
    this.std = new Float64Array(dim).fill(1);
    if (rng) {
      for (let i = 0; i < this.w.length; i++) this.w[i] = 0.01 * rng.gauss();
    }
    this.adamW = { m: new Float64Array(this.w.length), v: new Float64Array(this.w.length), t: 0 };
    this.adamB = { m: new Float64Array(numClasses), v: new Float64Array(numClasses), t: 0 };
  }

  setNormalization(mean: Float64Array, std: Float64Array): void {
    this.mean = mean;
    this.std = std;
  }

  private normalized(x: Float32Array, out: Float64Array): void {
    for (let i = 0; i < this.dim; i++) out[i] = (x[i] - this.mean[i]) / this.std[i];
  }

  logits(x: Float32Array, out: Float64Array, xn: Float64Array): void {
    this.normalized(x, xn);
    for (let c = 0; c < this.numClasses; c++) {
      let s = this.b[c];
      const off = c * this.dim;
      for (let i = 0; i < this.dim; i++) s += this.w[off + i] * xn[i];
      out[c] = s;
    }
  }

  probs(x: Float32Array): Float32Array {
    const out = new Float64Array(this.numClasses);
    this.logits(x, out, new Float64Array(this.dim));
    softmaxInPlace(out);
    return Float32Array.from(out);
  }

  /** One Adam update on a frame minibatch; returns mean cross-entropy. */
  trainBatch(xs: Float32Array[], ys: number[], lr: number): number {
    const C = this.numClasses;
    const gw = new Float64Array(C * this.dim);
    const gb = new Float64Array(C);
    const logit = new Float64Array(C);
    const xn = new Float64Array(this.dim);
    let loss = 0;
    const n = xs.length;
    for (let k = 0; k < n; k++) {
      this.logits(xs[k], logit, xn);
      softmaxInPlace(logit);
      loss += -Math.log(logit[ys[k]] + 1e-12);
      for (let c = 0; c < C; c++) {
        const g = (logit[c] - (c === ys[k] ? 1 : 0)) / n;
        gb[c] += g;
        const off = c * this.dim;
        for (let i = 0; i < this.dim; i++) gw[off + i] += g * xn[i];
      }
    }
    for (let i = 0; i < gw.length; i++) gw[i] += this.l2 * this.w[i];
    adamStep(this.w, gw, this.adamW, lr);
    adamStep(this.b, gb, this.adamB, lr);
    return loss / n;
  }

  meanLoss(xs: Float32Array[], ys: number[]): number {
    const logit = new Float64Array(this.numClasses);
    const xn = new Float64Array(this.dim);
    let loss = 0;
    for (let k = 0; k < xs.length; k++) {
      this.logits(xs[k], logit, xn);
      softmaxInPlace(logit);
      loss += -Math.log(logit[ys[k]] + 1e-12);
    }
    return loss / xs.length;
  }

  snapshot(): LinearHeadState {
    return {
      kind: "fc",
      dim: this.dim,
      numClasses: this.numClasses,
      weights: [...this.w, ...this.b],
      mean: Array.from(this.mean),
      std: Array.from(this.std),
    };
  }

  static fromState(state: LinearHeadState): LinearHead {
    const head = new LinearHead(state.dim, state.numClasses);
    head.w.set(state.weights.slice(0, state.numClasses * state.dim));
    head.b.set(state.weights.slice(state.numClasses * state.dim));
    head.mean = Float64Array.from(state.mean);
    head.std = Float64Array.from(state.std);
    return head;
  }
}
