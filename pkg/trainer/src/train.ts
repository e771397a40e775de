/**
 * Training loop for the frame-level pre-shape classifiers.
 *
 * Per epoch: downsample every class to the minority cardinality, shuffle,
 * optimize with Adam, then measure the validation loss. The learning
 * rate drops by plateauFactor after plateauPatience epochs without a new
 * best validation loss; training stops after earlyStopPatience such
 * epochs. The returned model carries the weights of the best validation
 * epoch.
 */

import * as fs from "node:fs";

import { balanceEpoch } from "./balance.js";
import { FeatureStore, HandcraftedV1 } from "./features.js";
import {
  GRASP_CLASSES,
  ManifestRow,
  PRE_SHAPES,
  Predictions,
  PreShape,
  readFrameLabels,
  readManifest,
} from "./formats.js";
import { LinearHead, LinearHeadState } from "./linear.js";
import { LstmHead, LstmHeadState } from "./lstm.js";
import { deriveSeed, Rng } from "./rng.js";
import { PlateauSchedule } from "./schedule.js";

export type HeadKind = "fc" | "recurrent";

export interface TrainConfig {
  head: HeadKind;
  numClasses: number;
  hiddenUnits: number;
  batchSize: number;
  lrInit: number;
  plateauFactor: number;
  plateauPatience: number;
  earlyStopPatience: number;
  maxEpochs: number;
  trials: number;
  seqBatch: number; // sequences per update for the recurrent head
}

export const DEFAULT_CONFIG: TrainConfig = {
  head: "fc",
  numClasses: 5,
  hiddenUnits: 256,
  batchSize: 256,
  lrInit: 0.0005,
  plateauFactor: 0.1,
  plateauPatience: 6,
  earlyStopPatience: 10,
  maxEpochs: 200,
  trials: 3,
  seqBatch: 4,
};

export function validateConfig(cfg: TrainConfig): void {
  if (cfg.earlyStopPatience <= cfg.plateauPatience) {
    throw new Error("earlyStopPatience must exceed plateauPatience");
  }
  const positive = [
    cfg.numClasses,
    cfg.hiddenUnits,
    cfg.batchSize,
    cfg.lrInit,
    cfg.plateauFactor,
    cfg.plateauPatience,
    cfg.earlyStopPatience,
    cfg.maxEpochs,
    cfg.trials,
    cfg.seqBatch,
  ];
  if (positive.some((v) => !(v > 0))) {
    throw new Error("all TrainConfig values must be positive");
  }
}

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  valLoss: number;
  lr: number;
  subsetSizes: Record<string, number>;
}

export interface TrainLog {
  epochs: EpochLog[];
  finalEpoch: number;
  bestEpoch: number;
  lrDropEpochs: number[];
  stoppedEarly: boolean;
  backboneVersion: string;
}

export class TrainingDivergedError extends Error {
  constructor(
    message: string,
    readonly log: TrainLog,
  ) {
    super(message);
  }
}

export interface SequenceData {
  seqId: string;
  preShape: PreShape;
  features: Float32Array[];
  labels: number[]; // class indices in PRE_SHAPES order
}

export interface Model {
  config: TrainConfig;
  state: LinearHeadState | LstmHeadState;
  backboneVersion: string;
}

export function loadSequences(root: string): SequenceData[] {
  const store = new FeatureStore(root, new HandcraftedV1());
  return readManifest(root).map((row) => loadSequence(store, root, row));
}

function loadSequence(
  store: FeatureStore,
  root: string,
  row: ManifestRow,
): SequenceData {
  const features = store.sequenceFeatures(row);
  const labels = readFrameLabels(root, row).map((f) =>
    PRE_SHAPES.indexOf(f.label),
  );
  return { seqId: row.seqId, preShape: row.preShape, features, labels };
}

function computeNormalization(seqs: SequenceData[]) {
  const dim = seqs[0].features[0].length;
  const mean = new Float64Array(dim);
  const std = new Float64Array(dim);
  let n = 0;
  for (const s of seqs) {
    for (const f of s.features) {
      for (let i = 0; i < dim; i++) mean[i] += f[i];
      n++;
    }
  }
  for (let i = 0; i < dim; i++) mean[i] /= n;
  for (const s of seqs) {
    for (const f of s.features) {
      for (let i = 0; i < dim; i++) {
        const d = f[i] - mean[i];
        std[i] += d * d;
      }
    }
  }
  for (let i = 0; i < dim; i++) std[i] = Math.sqrt(std[i] / n) + 1e-6;
  return { mean, std };
}

export function train(
  cfg: TrainConfig,
  trainRoot: string,
  valRoot: string,
  seed: number,
): { model: Model; log: TrainLog } {
  validateConfig(cfg);
  const backbone = new HandcraftedV1();
  const trainRows = readManifest(trainRoot);
  const trainSeqs = new Map<string, SequenceData>();
  {
    const store = new FeatureStore(trainRoot, backbone);
    for (const row of trainRows) {
      trainSeqs.set(row.seqId, loadSequence(store, trainRoot, row));
    }
  }
  const valSeqs = loadSequences(valRoot);
  if (valSeqs.length === 0) throw new Error("empty validation set");

  const dim = backbone.dim;
  const rng = new Rng(deriveSeed(seed, 0x7e));
  const head =
    cfg.head === "fc"
      ? new LinearHead(dim, cfg.numClasses, rng)
      : new LstmHead(dim, cfg.hiddenUnits, cfg.numClasses, rng);
  const { mean, std } = computeNormalization([...trainSeqs.values()]);
  head.setNormalization(mean, std);

  const sched = new PlateauSchedule(cfg);
  const log: TrainLog = {
    epochs: [],
    finalEpoch: 0,
    bestEpoch: 0,
    lrDropEpochs: [],
    stoppedEarly: false,
    backboneVersion: backbone.version,
  };
  let best: LinearHeadState | LstmHeadState = head.snapshot();

  for (let epoch = 1; epoch <= cfg.maxEpochs; epoch++) {
    const lr = sched.lr;
    const selected = balanceEpoch(trainRows, epoch, seed);
    const subsetSizes: Record<string, number> = {};
    const epochSeqs: SequenceData[] = [];
    for (const c of GRASP_CLASSES) {
      const ids = selected.get(c)!;
      subsetSizes[c] = ids.length;
      for (const id of ids) epochSeqs.push(trainSeqs.get(id)!);
    }

    let trainLoss: number;
    if (head instanceof LinearHead) {
      const xs: Float32Array[] = [];
      const ys: number[] = [];
      for (const s of epochSeqs) {
        s.features.forEach((f, k) => {
          xs.push(f);
          ys.push(s.labels[k]);
        });
      }
      const order = rng.permutation(xs.length);
      let total = 0;
      let batches = 0;
      for (let s0 = 0; s0 < xs.length; s0 += cfg.batchSize) {
        const bx: Float32Array[] = [];
        const by: number[] = [];
        for (let i = s0; i < Math.min(s0 + cfg.batchSize, xs.length); i++) {
          bx.push(xs[order[i]]);
          by.push(ys[order[i]]);
        }
        total += head.trainBatch(bx, by, lr);
        batches++;
      }
      trainLoss = total / batches;
    } else {
      const order = rng.permutation(epochSeqs.length);
      let total = 0;
      for (let i = 0; i < order.length; i++) {
        total += head.accumulate(
          epochSeqs[order[i]].features,
          epochSeqs[order[i]].labels,
        );
        if ((i + 1) % cfg.seqBatch === 0 || i === order.length - 1) {
          head.step(lr);
        }
      }
      trainLoss = total / order.length;
    }

    const valLoss = meanValLoss(head, valSeqs);
    log.epochs.push({ epoch, trainLoss, valLoss, lr, subsetSizes });
    log.finalEpoch = epoch;
    if (!Number.isFinite(trainLoss) || !Number.isFinite(valLoss)) {
      throw new TrainingDivergedError(
        `loss diverged at epoch ${epoch} (train ${trainLoss}, val ${valLoss})`,
        log,
      );
    }

    const improvedOrContinue = sched.observe(epoch, valLoss);
    if (sched.bestEpoch === epoch) best = head.snapshot();
    log.bestEpoch = sched.bestEpoch;
    log.lrDropEpochs = [...sched.events.dropEpochs];
    if (!improvedOrContinue) {
      log.stoppedEarly = true;
      break;
    }
  }

  return {
    model: { config: cfg, state: best, backboneVersion: backbone.version },
    log,
  };
}

function meanValLoss(head: LinearHead | LstmHead, seqs: SequenceData[]): number {
  if (head instanceof LinearHead) {
    const xs: Float32Array[] = [];
    const ys: number[] = [];
    for (const s of seqs) {
      s.features.forEach((f, k) => {
        xs.push(f);
        ys.push(s.labels[k]);
      });
    }
    return head.meanLoss(xs, ys);
  }
  let total = 0;
  let frames = 0;
  for (const s of seqs) {
    total += head.meanLoss(s.features, s.labels) * s.features.length;
    frames += s.features.length;
  }
  return total / frames;
}

export function predict(model: Model, root: string): Predictions {
  const head =
    model.state.kind === "fc"
      ? LinearHead.fromState(model.state)
      : LstmHead.fromState(model.state);
  const seqs = loadSequences(root);
  const scores = new Map<string, Float32Array[]>();
  for (const s of seqs) {
    if (head instanceof LinearHead) {
      scores.set(
        s.seqId,
        s.features.map((f) => head.probs(f)),
      );
    } else {
      scores.set(s.seqId, head.predictSequence(s.features));
    }
  }
  return { seqIds: seqs.map((s) => s.seqId), scores };
}

export function saveModel(file: string, model: Model): void {
  fs.writeFileSync(file, JSON.stringify(model));
}

export function loadModel(file: string): Model {
  return JSON.parse(fs.readFileSync(file, "utf-8")) as Model;
}
